#pragma once

#include <string>
#include <utility>

namespace flatlab {

/// Mse, TruncatedMse(c) with the quadratic/bent/flat branches, and logistic
/// loss with label smoothing probability p (targets b in {0,1}).
struct LossKind {
    enum class Variant { Mse, TruncatedMse, LogisticSmoothed };
    Variant variant = Variant::Mse;
    double c = 0.0; // truncation level, > 0
    double p = 0.0; // smoothing probability, in (0,1)

    static LossKind mse() { return {Variant::Mse, 0.0, 0.0}; }
    static LossKind truncated(double c);
    static LossKind logistic(double p);
};

LossKind loss_from_string(const std::string& s); // "mse" | "truncated:<c>" | "logistic:<p>"
std::string to_string(const LossKind& k);

double loss_value(const LossKind& kind, double prediction, double target);

/// (d/da, d^2/da^2) of the loss w.r.t. the prediction. The truncated loss is
/// C^1; its second derivative is piecewise {2, -2, 0}.
std::pair<double, double> loss_derivatives(const LossKind& kind, double prediction, double target);

/// ln((1-p)/p), the interpolation target magnitude for smoothed logistic loss.
double gamma_p(double p);

} // namespace flatlab
