#include "flatlab/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace flatlab {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void save_dataset_csv(const LabeledDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (std::size_t c = 0; c < data.d; ++c) out << "x" << (c + 1) << ",";
    out << "y\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto x = data.row(i);
        for (std::size_t c = 0; c < data.d; ++c) out << fmt17(x[c]) << ",";
        out << fmt17(data.labels[i]) << "\n";
    }
}

LabeledDataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
    std::size_t d = 0;
    for (char ch : line)
        if (ch == ',') ++d; // header has d 'x' columns + y
    LabeledDataset data;
    data.d = d;
    data.source = SourceTag::Custom;
    std::vector<double> row(d);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t c = 0; c < d; ++c) {
            if (!std::getline(ss, cell, ',')) throw std::runtime_error("malformed csv row: " + line);
            row[c] = std::stod(cell);
        }
        if (!std::getline(ss, cell, ',')) throw std::runtime_error("malformed csv row: " + line);
        data.push_row(row, std::stod(cell));
    }
    return data;
}

void save_checkpoint(const ArchSpec& spec, const ModelParams& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "arch=" << to_string(spec.kind) << " depth=" << spec.depth << " m=" << spec.width
        << " d=" << spec.input_dim << " act=" << to_string(spec.act)
        << " ln_eps=" << fmt17(spec.ln_epsilon) << "\n";
    for (double v : flatten(spec, p)) out << fmt17(v) << "\n";
}

std::pair<ArchSpec, ModelParams> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty checkpoint: " + path);
    ArchSpec spec;
    std::stringstream ss(header);
    std::string tok;
    while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw std::runtime_error("bad checkpoint header: " + header);
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "arch") spec.kind = arch_from_string(val);
        else if (key == "depth") spec.depth = std::stoi(val);
        else if (key == "m") spec.width = std::stoi(val);
        else if (key == "d") spec.input_dim = std::stoi(val);
        else if (key == "act") spec.act = activation_from_string(val);
        else if (key == "ln_eps") spec.ln_epsilon = std::stod(val);
        else throw std::runtime_error("unknown checkpoint header key: " + key);
    }
    spec.validate();
    Vec theta;
    theta.reserve(spec.param_count());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        theta.push_back(std::stod(line));
    }
    return {spec, unflatten(spec, theta)};
}

std::map<std::string, std::string> load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("bad config line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

void save_config(const std::map<std::string, std::string>& kv, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

} // namespace flatlab
