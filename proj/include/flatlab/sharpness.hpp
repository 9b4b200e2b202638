#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "flatlab/dataset.hpp"
#include "flatlab/loss.hpp"
#include "flatlab/model.hpp"

namespace flatlab {

using LossClosure = std::function<double(const Vec&)>;
using GradClosure = std::function<void(const Vec&, Vec&)>;

/// Interpolation targets: y for (truncated) MSE, gamma_p * y for logistic
/// (xor labels +-1 map to b = (y+1)/2).
Vec training_targets(const LabeledDataset& data, const LossKind& loss);

/// Second argument to loss_value per example: the label y for (truncated)
/// MSE, the binary class b = (y+1)/2 for logistic.
Vec loss_labels(const LabeledDataset& data, const LossKind& loss);

/// max_i |f(x_i) - target_i|. SimBN context is built from the dataset itself.
double interpolation_residual(const ArchSpec& spec, const ModelParams& p,
                              const LabeledDataset& data, const LossKind& loss);

/// (2/n) sum_i ||grad f(x_i)||^2, the Jacobian quantity of the interpolation
/// identity; logged as a surrogate when the model does not interpolate.
double jac_surrogate(const ArchSpec& spec, const ModelParams& p, const LabeledDataset& data);

/// Closed-form Hessian trace at an interpolating point: 2/n * sum ||grad f||^2
/// for MSE, p(1-p)/n * sum ||grad f||^2 for smoothed logistic (the second
/// derivative of the loss at its minimizing logit). Throws if the residual
/// exceeds tol or for TruncatedMse.
double exact_trace(const ArchSpec& spec, const ModelParams& p, const LabeledDataset& data,
                   const LossKind& loss, double tol = 1e-3);

/// Training loss as a function of flat parameters; SimBN batch statistics are
/// recomputed from the dataset at every evaluation point.
LossClosure make_loss_closure(const ArchSpec& spec, const LabeledDataset& data, const LossKind& loss);
GradClosure make_grad_closure(const ArchSpec& spec, const LabeledDataset& data, const LossKind& loss);

/// Central second differences along every coordinate, step h*(1+|theta_k|).
double full_fd_trace(const LossClosure& loss, const Vec& theta, double h = 1e-3);

struct HutchinsonEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    int n_probes = 0;
};

/// Rademacher-probe trace estimator; Hv by central gradient differences.
HutchinsonEstimate hutchinson_trace(const GradClosure& grad, const Vec& theta, int n_probes,
                                    double h, std::uint64_t seed);

/// Closed-form infimum of the trace over interpolating models, where the paper
/// gives one (absent for NoBias). Sets *warn when the dataset precondition
/// (extreme points / complete xor set) is not verifiably met.
std::optional<double> theoretical_min(const ArchSpec& spec, const LabeledDataset& data,
                                      bool* warn = nullptr);

/// sum_j ||W1_j|| * |W2_j| for depth-2 models; bias folded into the row norm
/// when present, and |gamma_j| folded into the outgoing weight for SimBN.
double path_norm(const ArchSpec& spec, const ModelParams& p);

struct SharpnessReport {
    std::optional<double> exact;     // absent when not interpolating
    double oracle = 0.0;             // full-fd or hutchinson estimate
    std::string oracle_kind;         // "full-fd" | "hutchinson(k)"
    double oracle_std_error = 0.0;   // hutchinson only
    std::optional<double> theory_min;
    bool theory_min_warn = false;
    double path_norm = 0.0;
    double residual = 0.0;
};

/// Full report; uses full-fd when the parameter count allows, hutchinson
/// otherwise.
SharpnessReport sharpness_report(const ArchSpec& spec, const ModelParams& p,
                                 const LabeledDataset& data, const LossKind& loss,
                                 double tol = 1e-3, std::uint64_t seed = 0);

std::string report_csv_header();
std::string report_csv_row(const SharpnessReport& r);
std::string report_summary(const SharpnessReport& r);

} // namespace flatlab
