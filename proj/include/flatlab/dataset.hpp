#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace flatlab {

enum class SourceTag { XorHypercube, CompleteXor, UniformBall, Circle, Custom };

std::string to_string(SourceTag tag);

/// n labeled points in R^d, row-major storage.
struct LabeledDataset {
    std::size_t d = 0;
    std::vector<double> inputs; // n*d, row-major
    std::vector<double> labels; // n
    SourceTag source = SourceTag::Custom;

    std::size_t size() const { return labels.size(); }
    std::span<const double> row(std::size_t i) const { return {inputs.data() + i * d, d}; }
    void push_row(std::span<const double> x, double y);
};

/// n i.i.d. uniform points of {-1,1}^d with y = x[1]*x[2].
/// dedupe=true rejects repeated rows (constructions need distinct extreme points).
LabeledDataset sample_xor(int d, std::size_t n, std::uint64_t seed, bool dedupe = false);

/// All 2^d hypercube points in lexicographic order (-1 before +1), y = x[1]*x[2].
LabeledDataset enumerate_hypercube(int d);

/// Complete training set of Condition "complete xor": canonical tail set
/// S = {all-ones} + {all-ones with coordinate k flipped}, |S| = d-1, n = 4(d-1).
LabeledDataset build_complete_xor_set(int d);

/// Uniform in the radius-sqrt(d) ball (gaussian direction, radius sqrt(d)*U^(1/d)),
/// y = |x[1]| - |x[2]|.
LabeledDataset sample_uniform_ball(int d, std::size_t n, std::uint64_t seed);

/// First two coordinates uniform on the unit circle, coordinate 3 padded so that
/// ||x|| = R, labels = label_fn(x[1], x[2]). Requires R >= 1.
LabeledDataset sample_circle(std::size_t n, const std::function<double(double, double)>& label_fn,
                             double R, int d, std::uint64_t seed);

/// Exhaustive hypercube when 2^d <= 2^20, otherwise a fresh 10^4-point draw.
LabeledDataset make_xor_test_set(int d, std::uint64_t seed, std::size_t n_mc = 10000);

/// Rank of span{s_i - s_j} by Gaussian elimination (tolerance 1e-9).
int difference_span_rank(const std::vector<std::vector<double>>& points);

/// True when the dataset matches the complete-xor shape (groups of 4 sign
/// patterns over a common tail, labels x1*x2, tail differences spanning d-2).
bool is_complete_xor(const LabeledDataset& data);

} // namespace flatlab
