#include "flatlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

#include "flatlab/rng.hpp"

namespace flatlab {

std::string to_string(SourceTag tag) {
    switch (tag) {
    case SourceTag::XorHypercube: return "xor-hypercube";
    case SourceTag::CompleteXor: return "complete-xor";
    case SourceTag::UniformBall: return "uniform-ball";
    case SourceTag::Circle: return "circle";
    case SourceTag::Custom: return "custom";
    }
    return "custom";
}

void LabeledDataset::push_row(std::span<const double> x, double y) {
    if (d == 0) d = x.size();
    if (x.size() != d) throw std::invalid_argument("push_row: dimension mismatch");
    inputs.insert(inputs.end(), x.begin(), x.end());
    labels.push_back(y);
}

LabeledDataset sample_xor(int d, std::size_t n, std::uint64_t seed, bool dedupe) {
    if (d < 2) throw std::invalid_argument("sample_xor: invalid-dimension, need d >= 2");
    if (dedupe && d < 63 && n > (std::size_t{1} << d))
        throw std::invalid_argument("sample_xor: cannot draw more distinct points than 2^d");
    LabeledDataset out;
    out.d = static_cast<std::size_t>(d);
    out.source = SourceTag::XorHypercube;
    Rng rng = make_rng(derive_seed(seed, 0x11));
    std::set<std::vector<double>> seen;
    std::vector<double> x(out.d);
    while (out.size() < n) {
        for (auto& v : x) v = uniform_sign(rng);
        if (dedupe && !seen.insert(x).second) continue;
        out.push_row(x, x[0] * x[1]);
    }
    return out;
}

LabeledDataset enumerate_hypercube(int d) {
    if (d < 2) throw std::invalid_argument("enumerate_hypercube: invalid-dimension, need d >= 2");
    if (d > 22) throw std::invalid_argument("enumerate_hypercube: capacity error, d > 22");
    const std::size_t n = std::size_t{1} << d;
    LabeledDataset out;
    out.d = static_cast<std::size_t>(d);
    out.source = SourceTag::XorHypercube;
    out.inputs.reserve(n * out.d);
    std::vector<double> x(out.d);
    for (std::size_t k = 0; k < n; ++k) {
        // lexicographic with -1 < +1, coordinate 1 most significant
        for (int j = 0; j < d; ++j)
            x[j] = (k >> (d - 1 - j)) & 1 ? 1.0 : -1.0;
        out.push_row(x, x[0] * x[1]);
    }
    return out;
}

LabeledDataset build_complete_xor_set(int d) {
    if (d < 3) throw std::invalid_argument("build_complete_xor_set: need d >= 3");
    LabeledDataset out;
    out.d = static_cast<std::size_t>(d);
    out.source = SourceTag::CompleteXor;
    const int tail = d - 2;
    static const double kSigns[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
    std::vector<double> x(out.d);
    for (int s = 0; s < d - 1; ++s) { // s=0: all ones; s=k: coordinate k flipped
        for (int t = 0; t < 4; ++t) {
            x[0] = kSigns[t][0];
            x[1] = kSigns[t][1];
            for (int j = 0; j < tail; ++j) x[2 + j] = (s == j + 1) ? -1.0 : 1.0;
            out.push_row(x, x[0] * x[1]);
        }
    }
    return out;
}

LabeledDataset sample_uniform_ball(int d, std::size_t n, std::uint64_t seed) {
    if (d < 2) throw std::invalid_argument("sample_uniform_ball: need d >= 2");
    LabeledDataset out;
    out.d = static_cast<std::size_t>(d);
    out.source = SourceTag::UniformBall;
    Rng rng = make_rng(derive_seed(seed, 0x12));
    const double R = std::sqrt(static_cast<double>(d));
    std::vector<double> x(out.d);
    for (std::size_t i = 0; i < n; ++i) {
        double norm2 = 0.0;
        for (auto& v : x) {
            v = gaussian(rng);
            norm2 += v * v;
        }
        const double norm = std::sqrt(norm2);
        const double r = R * std::pow(uniform01(rng), 1.0 / d);
        const double scale = norm > 0 ? r / norm : 0.0;
        for (auto& v : x) v *= scale;
        out.push_row(x, std::abs(x[0]) - std::abs(x[1]));
    }
    return out;
}

LabeledDataset sample_circle(std::size_t n, const std::function<double(double, double)>& label_fn,
                             double R, int d, std::uint64_t seed) {
    if (n < 3) throw std::invalid_argument("sample_circle: need n >= 3");
    if (d < 2) throw std::invalid_argument("sample_circle: need d >= 2");
    if (R < 1.0) throw std::invalid_argument("sample_circle: infeasible-radius, need R >= 1");
    if (R > 1.0 && d < 3) throw std::invalid_argument("sample_circle: R > 1 needs d >= 3 for padding");
    LabeledDataset out;
    out.d = static_cast<std::size_t>(d);
    out.source = SourceTag::Circle;
    Rng rng = make_rng(derive_seed(seed, 0x13));
    const double pad = std::sqrt(std::max(0.0, R * R - 1.0));
    std::vector<double> x(out.d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double phi = 2.0 * M_PI * uniform01(rng);
        x[0] = std::cos(phi);
        x[1] = std::sin(phi);
        if (d >= 3) x[2] = pad;
        out.push_row(x, label_fn(x[0], x[1]));
    }
    return out;
}

LabeledDataset make_xor_test_set(int d, std::uint64_t seed, std::size_t n_mc) {
    if (d <= 20) return enumerate_hypercube(d);
    return sample_xor(d, n_mc, seed);
}

int difference_span_rank(const std::vector<std::vector<double>>& points) {
    if (points.size() < 2) return 0;
    const std::size_t dim = points[0].size();
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 1; i < points.size(); ++i) {
        std::vector<double> diff(dim);
        for (std::size_t j = 0; j < dim; ++j) diff[j] = points[i][j] - points[0][j];
        rows.push_back(std::move(diff));
    }
    // row reduction with partial pivoting
    int rank = 0;
    for (std::size_t col = 0; col < dim && rank < static_cast<int>(rows.size()); ++col) {
        std::size_t pivot = rank;
        for (std::size_t r = rank; r < rows.size(); ++r)
            if (std::abs(rows[r][col]) > std::abs(rows[pivot][col])) pivot = r;
        if (std::abs(rows[pivot][col]) < 1e-9) continue;
        std::swap(rows[rank], rows[pivot]);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (static_cast<int>(r) == rank) continue;
            const double f = rows[r][col] / rows[rank][col];
            for (std::size_t j = col; j < dim; ++j) rows[r][j] -= f * rows[rank][j];
        }
        ++rank;
    }
    return rank;
}

bool is_complete_xor(const LabeledDataset& data) {
    if (data.d < 3 || data.size() % 4 != 0 || data.size() == 0) return false;
    const int tail = static_cast<int>(data.d) - 2;
    std::set<std::vector<double>> tails;
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto x = data.row(i);
        for (double v : x)
            if (v != 1.0 && v != -1.0) return false;
        if (data.labels[i] != x[0] * x[1]) return false;
        tails.insert(std::vector<double>(x.begin() + 2, x.end()));
    }
    // each tail must carry all four sign patterns
    if (tails.size() * 4 != data.size()) {
        std::set<std::vector<double>> rows;
        for (std::size_t i = 0; i < data.size(); ++i) {
            auto x = data.row(i);
            rows.insert(std::vector<double>(x.begin(), x.end()));
        }
        if (rows.size() != data.size()) return false; // duplicates
        return false;
    }
    std::set<std::vector<double>> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto x = data.row(i);
        rows.insert(std::vector<double>(x.begin(), x.end()));
    }
    if (rows.size() != data.size()) return false;
    return difference_span_rank(std::vector<std::vector<double>>(tails.begin(), tails.end())) == tail;
}

} // namespace flatlab
