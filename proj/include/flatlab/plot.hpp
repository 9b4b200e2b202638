#pragma once

#include <string>
#include <vector>

namespace flatlab {

/// Column-oriented view of a small CSV file (first line = header).
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data; // data[col][row]
    const std::vector<double>& column(const std::string& name) const;
};

CsvTable load_csv_table(const std::string& path);

struct PlotOptions {
    bool log_y = false;
    int width = 640;
    int height = 400;
    std::string title;
};

/// Self-contained SVG line chart of the named y-columns against the first
/// column. Byte-deterministic for identical inputs.
std::string render_svg(const CsvTable& table, const std::vector<std::string>& y_columns,
                       const PlotOptions& opts = {});

void emit_plot(const std::string& csv_path, const std::vector<std::string>& y_columns,
               const std::string& out_path, const PlotOptions& opts = {});

/// The affine data->pixel map used by render_svg, exposed so plots can be
/// inverted (tests read polyline points back into data values).
struct PlotTransform {
    double x_min, x_max, y_min, y_max;
    int width, height;
    bool log_y;
    static constexpr int pad_left = 56, pad_right = 12, pad_top = 24, pad_bottom = 32;
    double x_px(double x) const;
    double y_px(double y) const;
    double x_from_px(double px) const;
    double y_from_px(double py) const;
};

PlotTransform plot_transform(const CsvTable& table, const std::vector<std::string>& y_columns,
                             const PlotOptions& opts);

} // namespace flatlab
