#include "flatlab/sharpness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "flatlab/rng.hpp"

namespace flatlab {

namespace {

// pairwise summation for a reproducible, well-conditioned reduction
double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

double norm2(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

const BatchContext* maybe_ctx(const ArchSpec& spec, const ModelParams& p,
                              const LabeledDataset& data, BatchContext& storage) {
    if (spec.kind != ArchKind::SimBN) return nullptr;
    storage = refresh_batch_context(spec, p, data);
    return &storage;
}

bool labels_are_pm1(const LabeledDataset& data) {
    for (double y : data.labels)
        if (y != 1.0 && y != -1.0) return false;
    return true;
}

} // namespace

Vec training_targets(const LabeledDataset& data, const LossKind& loss) {
    Vec t(data.labels);
    if (loss.variant == LossKind::Variant::LogisticSmoothed) {
        if (!labels_are_pm1(data))
            throw std::invalid_argument("logistic targets need +-1 labels");
        const double g = gamma_p(loss.p);
        for (double& v : t) v *= g;
    }
    return t;
}

Vec loss_labels(const LabeledDataset& data, const LossKind& loss) {
    Vec t(data.labels);
    if (loss.variant == LossKind::Variant::LogisticSmoothed) {
        if (!labels_are_pm1(data))
            throw std::invalid_argument("logistic targets need +-1 labels");
        for (double& v : t) v = (v + 1.0) / 2.0;
    }
    return t;
}

double interpolation_residual(const ArchSpec& spec, const ModelParams& p,
                              const LabeledDataset& data, const LossKind& loss) {
    BatchContext store;
    const BatchContext* ctx = maybe_ctx(spec, p, data, store);
    const Vec targets = training_targets(data, loss);
    double r = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        r = std::max(r, std::abs(forward(spec, p, data.row(i), ctx) - targets[i]));
    return r;
}

double jac_surrogate(const ArchSpec& spec, const ModelParams& p, const LabeledDataset& data) {
    BatchContext store;
    const BatchContext* ctx = maybe_ctx(spec, p, data, store);
    Vec g;
    Vec terms(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        per_example_grad(spec, p, data.row(i), ctx, g);
        terms[i] = norm2(g);
    }
    return 2.0 / static_cast<double>(data.size()) * pairwise_sum(terms.data(), terms.size());
}

double exact_trace(const ArchSpec& spec, const ModelParams& p, const LabeledDataset& data,
                   const LossKind& loss, double tol) {
    if (loss.variant == LossKind::Variant::TruncatedMse)
        throw std::invalid_argument("exact_trace: unsupported for TruncatedMse");
    const double residual = interpolation_residual(spec, p, data, loss);
    if (!(residual <= tol)) {
        std::ostringstream os;
        os << "exact_trace: model does not interpolate (max residual " << residual
           << " > tol " << tol << ")";
        throw std::runtime_error(os.str());
    }
    const double surrogate = jac_surrogate(spec, p, data); // (2/n) sum ||grad f||^2
    if (loss.variant == LossKind::Variant::Mse) return surrogate;
    // Smoothed logistic: the loss curvature at the minimizing logit is p(1-p),
    // so the trace is p(1-p) * (1/n) sum ||grad f||^2.
    return 0.5 * loss.p * (1.0 - loss.p) * surrogate;
}

LossClosure make_loss_closure(const ArchSpec& spec, const LabeledDataset& data,
                              const LossKind& loss) {
    Vec targets = loss_labels(data, loss);
    return [spec, data, loss, targets = std::move(targets)](const Vec& theta) {
        const ModelParams p = unflatten(spec, theta);
        BatchContext store;
        const BatchContext* ctx = maybe_ctx(spec, p, data, store);
        Vec terms(data.size());
        for (std::size_t i = 0; i < data.size(); ++i)
            terms[i] = loss_value(loss, forward(spec, p, data.row(i), ctx), targets[i]);
        return pairwise_sum(terms.data(), terms.size()) / static_cast<double>(data.size());
    };
}

GradClosure make_grad_closure(const ArchSpec& spec, const LabeledDataset& data,
                              const LossKind& loss) {
    Vec targets = loss_labels(data, loss);
    return [spec, data, loss, targets = std::move(targets)](const Vec& theta, Vec& out) {
        const ModelParams p = unflatten(spec, theta);
        BatchContext store;
        const BatchContext* ctx = maybe_ctx(spec, p, data, store);
        out.assign(theta.size(), 0.0);
        Vec g;
        const double inv_n = 1.0 / static_cast<double>(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double f = forward(spec, p, data.row(i), ctx);
            const double dl = loss_derivatives(loss, f, targets[i]).first;
            per_example_grad(spec, p, data.row(i), ctx, g);
            for (std::size_t k = 0; k < out.size(); ++k) out[k] += inv_n * dl * g[k];
        }
    };
}

double full_fd_trace(const LossClosure& loss, const Vec& theta, double h) {
    if (theta.size() > 50000)
        throw std::invalid_argument("full_fd_trace: parameter count above 5e4");
    Vec probe = theta;
    const double base = loss(theta);
    if (!std::isfinite(base)) throw std::runtime_error("full_fd_trace: non-finite loss");
    Vec terms(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const double hk = h * (1.0 + std::abs(theta[k]));
        probe[k] = theta[k] + hk;
        const double up = loss(probe);
        probe[k] = theta[k] - hk;
        const double down = loss(probe);
        probe[k] = theta[k];
        if (!std::isfinite(up) || !std::isfinite(down))
            throw std::runtime_error("full_fd_trace: non-finite loss");
        terms[k] = (up - 2.0 * base + down) / (hk * hk);
    }
    return pairwise_sum(terms.data(), terms.size());
}

HutchinsonEstimate hutchinson_trace(const GradClosure& grad, const Vec& theta, int n_probes,
                                    double h, std::uint64_t seed) {
    if (n_probes < 8) throw std::invalid_argument("hutchinson_trace: need n_probes >= 8");
    Vec plus = theta, minus = theta, gp, gm;
    double mean = 0.0, m2 = 0.0;
    for (int k = 0; k < n_probes; ++k) {
        Rng rng = make_rng(derive_seed(seed, 0x31, static_cast<std::uint64_t>(k)));
        Vec v(theta.size());
        for (auto& b : v) b = uniform_sign(rng);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            plus[i] = theta[i] + h * v[i];
            minus[i] = theta[i] - h * v[i];
        }
        grad(plus, gp);
        grad(minus, gm);
        double quad = 0.0; // v' H v
        for (std::size_t i = 0; i < theta.size(); ++i)
            quad += v[i] * (gp[i] - gm[i]) / (2.0 * h);
        const double delta = quad - mean;
        mean += delta / (k + 1);
        m2 += delta * (quad - mean);
    }
    HutchinsonEstimate out;
    out.estimate = mean;
    out.n_probes = n_probes;
    out.std_error = n_probes > 1 ? std::sqrt(m2 / (n_probes - 1) / n_probes) : 0.0;
    return out;
}

namespace {

// Extreme-point check for the closed-form minima: hypercube points or a common
// sphere with pairwise-distinct rows.
bool verifiably_extreme(const LabeledDataset& data) {
    const std::size_t n = data.size();
    if (n == 0) return false;
    double norm0 = 0.0;
    for (double v : data.row(0)) norm0 += v * v;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (double v : data.row(i)) s += v * v;
        if (std::abs(s - norm0) > 1e-9 * (1.0 + norm0)) return false;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double dist = 0.0;
            auto xi = data.row(i), xj = data.row(j);
            for (std::size_t c = 0; c < data.d; ++c) dist += (xi[c] - xj[c]) * (xi[c] - xj[c]);
            if (dist < 1e-18) return false;
        }
    return true;
}

} // namespace

std::optional<double> theoretical_min(const ArchSpec& spec, const LabeledDataset& data, bool* warn) {
    if (warn) *warn = false;
    const std::size_t n = data.size();
    switch (spec.kind) {
    case ArchKind::NoBias:
        return std::nullopt;
    case ArchKind::Bias: {
        if (warn && !verifiably_extreme(data)) *warn = true;
        const int D = spec.depth;
        Vec terms(n);
        for (std::size_t i = 0; i < n; ++i) {
            double x2 = 1.0; // augmented input
            for (double v : data.row(i)) x2 += v * v;
            const double y = std::abs(data.labels[i]);
            terms[i] = D * std::pow(y, 2.0 * (D - 1) / D) * std::pow(x2, 1.0 / D);
        }
        return 2.0 / static_cast<double>(n) * pairwise_sum(terms.data(), n);
    }
    case ArchKind::SimLN: {
        if (warn && !verifiably_extreme(data)) *warn = true;
        Vec terms(n);
        for (std::size_t i = 0; i < n; ++i) {
            double x2 = 1.0;
            for (double v : data.row(i)) x2 += v * v;
            terms[i] = std::min(1.0, 2.0 / spec.ln_epsilon * std::sqrt(x2) * std::abs(data.labels[i]));
        }
        return 2.0 / static_cast<double>(n) * pairwise_sum(terms.data(), n);
    }
    case ArchKind::SimBN: {
        if (warn && !is_complete_xor(data)) *warn = true;
        // min ||gamma .* W2||_1 = 2 over complete xor sets, so
        // min (||W2||^2 + ||gamma||^2) = 4, and the interpolation identity
        // (trace = (2/n) sum ||grad f||^2) doubles it once more. The finite
        // difference oracle confirms 8; see good_sbn_xor's scale sweep.
        return 8.0;
    }
    }
    return std::nullopt;
}

double path_norm(const ArchSpec& spec, const ModelParams& p) {
    if (spec.depth != 2)
        throw std::invalid_argument("path_norm: unsupported for depth > 2");
    const int m = spec.width, d = spec.input_dim;
    double total = 0.0;
    for (int j = 0; j < m; ++j) {
        double row2 = 0.0;
        const double* row = p.W[0].data() + static_cast<std::size_t>(j) * d;
        for (int c = 0; c < d; ++c) row2 += row[c] * row[c];
        if (spec.has_bias()) row2 += p.b1[j] * p.b1[j];
        double out = std::abs(p.W[1][j]);
        if (spec.kind == ArchKind::SimBN) out *= std::abs(p.gamma[j]);
        total += std::sqrt(row2) * out;
    }
    return total;
}

SharpnessReport sharpness_report(const ArchSpec& spec, const ModelParams& p,
                                 const LabeledDataset& data, const LossKind& loss,
                                 double tol, std::uint64_t seed) {
    SharpnessReport r;
    r.residual = interpolation_residual(spec, p, data, loss);
    r.path_norm = spec.depth == 2 ? path_norm(spec, p) : 0.0;
    bool warn = false;
    r.theory_min = theoretical_min(spec, data, &warn);
    r.theory_min_warn = warn;
    if (r.residual <= tol && loss.variant != LossKind::Variant::TruncatedMse)
        r.exact = exact_trace(spec, p, data, loss, tol);
    const Vec theta = flatten(spec, p);
    if (theta.size() <= 4096) {
        // finer step than the general default: reports are mostly taken on
        // steep constructions whose kink margins shrink with eps
        r.oracle = full_fd_trace(make_loss_closure(spec, data, loss), theta, 1e-5);
        r.oracle_kind = "full-fd";
    } else {
        auto est = hutchinson_trace(make_grad_closure(spec, data, loss), theta, 32, 1e-3, seed);
        r.oracle = est.estimate;
        r.oracle_std_error = est.std_error;
        r.oracle_kind = "hutchinson(32)";
    }
    return r;
}

std::string report_csv_header() {
    return "exact_trace,oracle_trace,oracle_kind,oracle_std_error,theoretical_min,theory_warn,"
           "path_norm,interpolation_residual";
}

std::string report_csv_row(const SharpnessReport& r) {
    std::ostringstream os;
    os.precision(17);
    if (r.exact) os << *r.exact;
    os << "," << r.oracle << "," << r.oracle_kind << "," << r.oracle_std_error << ",";
    if (r.theory_min) os << *r.theory_min;
    os << "," << (r.theory_min_warn ? 1 : 0) << "," << r.path_norm << "," << r.residual;
    return os.str();
}

std::string report_summary(const SharpnessReport& r) {
    std::ostringstream os;
    os.precision(10);
    os << "interpolation residual: " << r.residual << "\n";
    if (r.exact) os << "exact trace (interpolation identity): " << *r.exact << "\n";
    else os << "exact trace: n/a (not interpolating)\n";
    os << "oracle trace [" << r.oracle_kind << "]: " << r.oracle;
    if (r.oracle_std_error > 0) os << " +- " << r.oracle_std_error;
    os << "\n";
    if (r.theory_min)
        os << "theoretical minimum: " << *r.theory_min << (r.theory_min_warn ? " (precondition warning)" : "")
           << "\n";
    os << "path norm: " << r.path_norm << "\n";
    return os.str();
}

} // namespace flatlab
