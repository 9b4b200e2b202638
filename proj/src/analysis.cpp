#include "flatlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace flatlab {

double zero_one_error(const ArchSpec& spec, const ModelParams& p, const LabeledDataset& test,
                      const BatchContext* ctx) {
    if (test.size() == 0) throw std::invalid_argument("zero_one_error: empty test set");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < test.size(); ++i)
        if (test.labels[i] * forward(spec, p, test.row(i), ctx) <= 0.0) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(test.size());
}

double mse_test_loss(const ArchSpec& spec, const ModelParams& p, const LabeledDataset& test,
                     const BatchContext* ctx) {
    if (test.size() == 0) throw std::invalid_argument("mse_test_loss: empty test set");
    double s = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const double r = forward(spec, p, test.row(i), ctx) - test.labels[i];
        s += r * r;
    }
    return s / static_cast<double>(test.size());
}

NeuronReport neuron_report(const ArchSpec& spec, const ModelParams& p, int top_k) {
    if (spec.depth != 2) throw std::invalid_argument("neuron_report: depth-2 models only");
    if (top_k > spec.width) throw std::invalid_argument("neuron_report: top_k exceeds width");
    const int m = spec.width, d = spec.input_dim;
    NeuronReport rep;
    rep.rows.reserve(m);
    for (int j = 0; j < m; ++j) {
        const double* row = p.W[0].data() + static_cast<std::size_t>(j) * d;
        NeuronRow r;
        r.index = j;
        r.w1 = row[0];
        r.w2 = d > 1 ? row[1] : 0.0;
        double tail2 = 0.0;
        for (int c = 2; c < d; ++c) tail2 += row[c] * row[c];
        r.tail_norm = std::sqrt(tail2);
        r.row_norm = std::sqrt(tail2 + r.w1 * r.w1 + r.w2 * r.w2);
        r.out_weight = std::abs(p.W[1][j]);
        rep.rows.push_back(r);
    }
    std::stable_sort(rep.rows.begin(), rep.rows.end(),
                     [](const NeuronRow& a, const NeuronRow& b) { return a.row_norm > b.row_norm; });
    rep.rows.resize(top_k);
    double c1 = 0.0, c2 = 0.0;
    for (int j = 0; j < m; ++j) {
        const double* row = p.W[0].data() + static_cast<std::size_t>(j) * d;
        c1 += row[0] * row[0];
        if (d > 1) c2 += row[1] * row[1];
    }
    rep.col1_norm = std::sqrt(c1);
    rep.col2_norm = std::sqrt(c2);
    for (int c = 2; c < d; ++c) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) {
            const double v = p.W[0][static_cast<std::size_t>(j) * d + c];
            s += v * v;
        }
        rep.max_rest_col_norm = std::max(rep.max_rest_col_norm, std::sqrt(s));
    }
    return rep;
}

std::string neuron_report_csv(const NeuronReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "index,w1_1,w1_2,tail_norm,row_norm,abs_w2\n";
    for (const auto& row : r.rows)
        os << row.index << "," << row.w1 << "," << row.w2 << "," << row.tail_norm << ","
           << row.row_norm << "," << row.out_weight << "\n";
    return os.str();
}

std::string neuron_report_text(const NeuronReport& r) {
    std::ostringstream os;
    os.precision(5);
    os << "top neurons by first-layer row norm:\n";
    os << "  idx     W[1]      W[2]   ||W[3:d]||   ||row||    |W2|\n";
    for (const auto& row : r.rows) {
        os << "  " << row.index << "\t" << row.w1 << "\t" << row.w2 << "\t" << row.tail_norm
           << "\t" << row.row_norm << "\t" << row.out_weight << "\n";
    }
    os << "column norms: [1] " << r.col1_norm << "  [2] " << r.col2_norm
       << "  max rest " << r.max_rest_col_norm << "\n";
    return os.str();
}

double feature_alignment(const ArchSpec& spec, const ModelParams& p, double eps) {
    if (spec.depth != 2) throw std::invalid_argument("feature_alignment: depth-2 models only");
    if (spec.input_dim < 3) throw std::invalid_argument("feature_alignment: needs d >= 3");
    const int m = spec.width, d = spec.input_dim;
    double aligned = 0.0, total = 0.0;
    for (int j = 0; j < m; ++j) {
        const double* row = p.W[0].data() + static_cast<std::size_t>(j) * d;
        double row2 = 0.0, tail2 = 0.0;
        for (int c = 0; c < d; ++c) {
            row2 += row[c] * row[c];
            if (c >= 2) tail2 += row[c] * row[c];
        }
        const double norm = std::sqrt(row2);
        total += norm;
        if (std::sqrt(tail2) <= eps * norm) aligned += norm; // zero rows count as aligned
    }
    if (total == 0.0) return 1.0;
    return aligned / total;
}

} // namespace flatlab
