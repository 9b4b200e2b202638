#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flatlab/dataset.hpp"
#include "flatlab/loss.hpp"
#include "flatlab/model.hpp"

namespace flatlab {

struct Separators {
    std::vector<Vec> w;  // unit separators, one per training point
    Vec margin;          // w_i'x_i - max_{j!=i} w_i'x_j, strictly positive
    double min_margin() const;
};

/// Per-point strict linear separators. Points on a common sphere (hypercube
/// included) use w_i = x_i/||x_i||; otherwise a perceptron-style solver with
/// a 1e5 iteration cap. Throws a not-extreme error naming the offending index.
Separators find_separators(const LabeledDataset& data);

/// One-hot memorizing interpolant of minimal sharpness (width n per depth
/// level). eps defaults to min_margin/1000; must stay below the min margin.
ModelParams memorize_bias(const LabeledDataset& data, double eps = 0.0, int depth = 2);

enum class XorRadius { EqualityDerived, PaperPrinted }; // (d+1)^(1/4) vs (d^2+1)^(1/4)

/// Four-neuron interpolant of the xor hypercube, f(x) = x[1]x[2] everywhere.
ModelParams good_xor_bias(int d, int m = 4, XorRadius r = XorRadius::EqualityDerived);

/// Trace of good_xor_bias in closed form, 2(r^2 + (d+1)/r^2).
double good_xor_bias_trace(int d, XorRadius r);

/// Sim-LN memorizer matching the three-case optimal construction.
ModelParams memorize_simln(const LabeledDataset& data, double ln_eps, double delta = 0.0);

/// Sim-LN memorizer specialized to hypercube data (w_i = x_i), trace 2.
ModelParams bad_simln_xor(const LabeledDataset& data, double ln_eps, double delta = 0.0);

/// Four-neuron sim-LN interpolant, trace 2, exact labels on the hypercube.
ModelParams good_simln_xor(int d, double ln_eps, int m = 4);

/// Four-neuron sim-BN interpolant of a complete xor set; |gamma| = |W2| = 1/sqrt(2)
/// on active neurons so that ||gamma .* W2||_1 = 2 and ||W2||^2 + ||gamma||^2 = 4.
/// The trace approaches 4 from above as the first-layer scale s grows.
ModelParams good_sbn_xor(const LabeledDataset& data, double first_layer_scale, int m = 4,
                         bool* completeness_warn = nullptr);

/// One neuron per distinct extreme pattern of the first s coordinates; inputs
/// must share norm R and labels must be constant per pattern.
ModelParams good_polygon(const LabeledDataset& data, int s_dims, double R, double eps = 0.0);

/// Interpolant of circle-supported data built from same-sign "domino" neurons
/// spanning consecutive samples (plus boundary solos), so the network stays
/// close to the samples' values between them while meeting the depth-2 trace
/// minimum with equality. Width is data dependent; read it off the result
/// (p.W[1].size()). crossing_frac places each neuron's relu crossing at that
/// fraction of the neighbouring gap beyond its covered samples.
ModelParams good_circle(const LabeledDataset& data, double R, double crossing_frac = 0.7);

/// Largest off-one-hot activation over all hidden layers and training rows
/// (0 means every example activates exactly one neuron per layer).
double one_hot_violation(const ArchSpec& spec, const ModelParams& p, const LabeledDataset& data);

struct ConstructionCertificate {
    double interpolation_residual = 0.0;
    double achieved_trace = 0.0; // exact trace via the interpolation identity
    double theoretical_min = 0.0;
    double relative_gap = 0.0;   // |achieved - min| / max(min, 1e-12)
    double zero_one_error = 0.0; // on the evaluation set
    double off_support_zero_fraction = -1.0; // only meaningful for memorizers
};

/// Certificate over (training set, evaluation set). off_support counts eval
/// points with |f| < 1e-9.
ConstructionCertificate certify(const ArchSpec& spec, const ModelParams& p,
                                const LabeledDataset& train, const LabeledDataset& eval_set,
                                const LossKind& loss = LossKind::mse());

std::string certificate_csv_header();
std::string certificate_csv_row(const std::string& name, const ConstructionCertificate& c);

} // namespace flatlab
