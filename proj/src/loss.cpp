#include "flatlab/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace flatlab {

LossKind LossKind::truncated(double c) {
    if (c <= 0.0) throw std::invalid_argument("TruncatedMse requires c > 0");
    return {Variant::TruncatedMse, c, 0.0};
}

LossKind LossKind::logistic(double p) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("LogisticSmoothed requires p in (0,1)");
    return {Variant::LogisticSmoothed, 0.0, p};
}

LossKind loss_from_string(const std::string& s) {
    if (s == "mse") return LossKind::mse();
    if (s.rfind("truncated:", 0) == 0) return LossKind::truncated(std::stod(s.substr(10)));
    if (s.rfind("logistic:", 0) == 0) return LossKind::logistic(std::stod(s.substr(9)));
    throw std::invalid_argument("unknown loss: " + s);
}

std::string to_string(const LossKind& k) {
    switch (k.variant) {
    case LossKind::Variant::Mse: return "mse";
    case LossKind::Variant::TruncatedMse: return "truncated:" + std::to_string(k.c);
    case LossKind::Variant::LogisticSmoothed: return "logistic:" + std::to_string(k.p);
    }
    return "mse";
}

double gamma_p(double p) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("gamma_p: p must lie in (0,1)");
    return std::log((1.0 - p) / p);
}

namespace {

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

inline double softplus(double a) { return std::log1p(std::exp(-std::abs(a))) + (a > 0.0 ? a : 0.0); }

inline void check_logistic_target(double b) {
    if (b != 0.0 && b != 1.0)
        throw std::invalid_argument("logistic loss requires target in {0,1}");
}

// Smoothed target probability for label b: the b-class keeps mass 1-p, so the
// minimizing logit is (2b-1) * gamma_p.
inline double smoothed_target(double p, double b) { return b * (1.0 - p) + (1.0 - b) * p; }

} // namespace

double loss_value(const LossKind& kind, double prediction, double target) {
    switch (kind.variant) {
    case LossKind::Variant::Mse: {
        const double r = prediction - target;
        return r * r;
    }
    case LossKind::Variant::TruncatedMse: {
        const double c = kind.c;
        const double r = std::abs(prediction - target);
        if (r <= c) return r * r;
        if (r <= 2.0 * c) return -r * r + 4.0 * c * r - 2.0 * c * c;
        return 2.0 * c * c;
    }
    case LossKind::Variant::LogisticSmoothed: {
        check_logistic_target(target);
        const double t = smoothed_target(kind.p, target);
        return -t * prediction + softplus(prediction);
    }
    }
    return 0.0;
}

std::pair<double, double> loss_derivatives(const LossKind& kind, double prediction, double target) {
    switch (kind.variant) {
    case LossKind::Variant::Mse:
        return {2.0 * (prediction - target), 2.0};
    case LossKind::Variant::TruncatedMse: {
        const double c = kind.c;
        const double delta = prediction - target;
        const double r = std::abs(delta);
        const double sgn = delta >= 0.0 ? 1.0 : -1.0;
        if (r <= c) return {2.0 * delta, 2.0};
        if (r <= 2.0 * c) return {-2.0 * delta + 4.0 * c * sgn, -2.0};
        return {0.0, 0.0};
    }
    case LossKind::Variant::LogisticSmoothed: {
        check_logistic_target(target);
        const double t = smoothed_target(kind.p, target);
        const double s = sigmoid(prediction);
        return {s - t, s * (1.0 - s)};
    }
    }
    return {0.0, 0.0};
}

} // namespace flatlab
