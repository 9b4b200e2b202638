#include "flatlab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace flatlab {

const std::vector<double>& CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return data[i];
    throw std::invalid_argument("csv column not found: " + name);
}

CsvTable load_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("malformed csv: empty file " + path);
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) t.columns.push_back(cell);
    if (t.columns.empty()) throw std::runtime_error("malformed csv: no header " + path);
    t.data.resize(t.columns.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            if (!std::getline(ss, cell, ',')) throw std::runtime_error("malformed csv row: " + line);
            t.data[c].push_back(std::stod(cell));
        }
    }
    return t;
}

double PlotTransform::x_px(double x) const {
    const double span = x_max > x_min ? x_max - x_min : 1.0;
    return pad_left + (x - x_min) / span * (width - pad_left - pad_right);
}

double PlotTransform::y_px(double y) const {
    double lo = y_min, hi = y_max, v = y;
    if (log_y) { lo = std::log10(y_min); hi = std::log10(y_max); v = std::log10(std::max(y, 1e-300)); }
    const double span = hi > lo ? hi - lo : 1.0;
    return height - pad_bottom - (v - lo) / span * (height - pad_top - pad_bottom);
}

double PlotTransform::x_from_px(double px) const {
    const double span = x_max > x_min ? x_max - x_min : 1.0;
    return x_min + (px - pad_left) / (width - pad_left - pad_right) * span;
}

double PlotTransform::y_from_px(double py) const {
    double lo = y_min, hi = y_max;
    if (log_y) { lo = std::log10(y_min); hi = std::log10(y_max); }
    const double span = hi > lo ? hi - lo : 1.0;
    const double v = lo + (height - pad_bottom - py) / (height - pad_top - pad_bottom) * span;
    return log_y ? std::pow(10.0, v) : v;
}

PlotTransform plot_transform(const CsvTable& table, const std::vector<std::string>& y_columns,
                             const PlotOptions& opts) {
    if (table.data.empty() || table.data[0].empty())
        throw std::invalid_argument("plot: empty table");
    PlotTransform t{};
    t.width = opts.width;
    t.height = opts.height;
    t.log_y = opts.log_y;
    const auto& xs = table.data[0];
    t.x_min = *std::min_element(xs.begin(), xs.end());
    t.x_max = *std::max_element(xs.begin(), xs.end());
    t.y_min = 1e300;
    t.y_max = -1e300;
    for (const auto& name : y_columns)
        for (double v : table.column(name)) {
            if (opts.log_y && v <= 0.0) v = 1e-12; // floor for log plots
            t.y_min = std::min(t.y_min, v);
            t.y_max = std::max(t.y_max, v);
        }
    if (t.y_min == t.y_max) { t.y_min -= 0.5; t.y_max += 0.5; }
    return t;
}

namespace {

std::string fmtpx(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::string fmtval(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

} // namespace

std::string render_svg(const CsvTable& table, const std::vector<std::string>& y_columns,
                       const PlotOptions& opts) {
    const PlotTransform t = plot_transform(table, y_columns, opts);
    const auto& xs = table.data[0];
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << t.width << "\" height=\""
      << t.height << "\" viewBox=\"0 0 " << t.width << " " << t.height << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // axes
    s << "<line x1=\"" << t.pad_left << "\" y1=\"" << (t.height - t.pad_bottom) << "\" x2=\""
      << (t.width - t.pad_right) << "\" y2=\"" << (t.height - t.pad_bottom)
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << t.pad_left << "\" y1=\"" << t.pad_top << "\" x2=\"" << t.pad_left
      << "\" y2=\"" << (t.height - t.pad_bottom) << "\" stroke=\"black\"/>\n";
    if (!opts.title.empty())
        s << "<text x=\"" << t.width / 2 << "\" y=\"16\" text-anchor=\"middle\" font-size=\"13\">"
          << opts.title << "</text>\n";
    // axis range labels (enough to invert the transform)
    s << "<text x=\"" << t.pad_left << "\" y=\"" << (t.height - 8) << "\" font-size=\"11\">"
      << fmtval(t.x_min) << "</text>\n";
    s << "<text x=\"" << (t.width - t.pad_right) << "\" y=\"" << (t.height - 8)
      << "\" text-anchor=\"end\" font-size=\"11\">" << fmtval(t.x_max) << "</text>\n";
    s << "<text x=\"4\" y=\"" << (t.height - t.pad_bottom) << "\" font-size=\"11\">"
      << fmtval(t.y_min) << "</text>\n";
    s << "<text x=\"4\" y=\"" << (t.pad_top + 10) << "\" font-size=\"11\">" << fmtval(t.y_max)
      << (opts.log_y ? " (log)" : "") << "</text>\n";
    for (std::size_t c = 0; c < y_columns.size(); ++c) {
        const auto& ys = table.column(y_columns[c]);
        s << "<polyline fill=\"none\" stroke=\"" << kColors[c % 6] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double v = ys[i];
            if (opts.log_y && v <= 0.0) v = 1e-12;
            if (i) s << " ";
            s << fmtpx(t.x_px(xs[i])) << "," << fmtpx(t.y_px(v));
        }
        s << "\"/>\n";
        s << "<text x=\"" << (t.pad_left + 8) << "\" y=\"" << (t.pad_top + 14 + 14 * c)
          << "\" font-size=\"11\" fill=\"" << kColors[c % 6] << "\">" << y_columns[c]
          << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

void emit_plot(const std::string& csv_path, const std::vector<std::string>& y_columns,
               const std::string& out_path, const PlotOptions& opts) {
    const CsvTable table = load_csv_table(csv_path);
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open for writing: " + out_path);
    out << render_svg(table, y_columns, opts);
}

} // namespace flatlab
