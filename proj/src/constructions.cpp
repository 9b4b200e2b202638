#include "flatlab/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "flatlab/analysis.hpp"
#include "flatlab/sharpness.hpp"

namespace flatlab {

double Separators::min_margin() const {
    return *std::min_element(margin.begin(), margin.end());
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void throw_not_extreme(std::size_t i) {
    std::ostringstream os;
    os << "find_separators: not-extreme, point " << i << " admits no strict separator";
    throw std::runtime_error(os.str());
}

} // namespace

Separators find_separators(const LabeledDataset& data) {
    const std::size_t n = data.size();
    if (n == 0) throw std::invalid_argument("find_separators: empty dataset");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double dist2 = 0.0;
            auto xi = data.row(i), xj = data.row(j);
            for (std::size_t c = 0; c < data.d; ++c) dist2 += (xi[c] - xj[c]) * (xi[c] - xj[c]);
            if (dist2 < 1e-18) throw_not_extreme(j);
        }

    Separators out;
    out.w.resize(n);
    out.margin.assign(n, 0.0);

    // common-sphere fast path: w_i = x_i / ||x_i||
    bool sphere = true;
    const double norm0 = norm(data.row(0));
    for (std::size_t i = 0; i < n && sphere; ++i)
        if (std::abs(norm(data.row(i)) - norm0) > 1e-9 * (1.0 + norm0)) sphere = false;
    if (sphere && norm0 > 0.0) {
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) {
            auto xi = data.row(i);
            const double ni = norm(xi);
            Vec w(xi.begin(), xi.end());
            for (auto& v : w) v /= ni;
            double best_other = -1e300;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) best_other = std::max(best_other, dot(w, data.row(j)));
            const double mu = dot(w, xi) - best_other;
            if (mu <= 0.0) { ok = false; break; }
            out.w[i] = std::move(w);
            out.margin[i] = mu;
        }
        if (ok) return out;
    }

    // perceptron on the difference vectors x_i - x_j
    for (std::size_t i = 0; i < n; ++i) {
        auto xi = data.row(i);
        Vec w(xi.begin(), xi.end());
        bool separated = false;
        for (long iter = 0; iter < 100000; ++iter) {
            bool violated = false;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                auto xj = data.row(j);
                if (dot(w, xi) - dot(w, xj) <= 0.0) {
                    for (std::size_t c = 0; c < data.d; ++c) w[c] += xi[c] - xj[c];
                    violated = true;
                }
            }
            if (!violated) { separated = true; break; }
        }
        if (!separated) throw_not_extreme(i);
        const double wn = norm(w);
        for (auto& v : w) v /= wn;
        double best_other = -1e300;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) best_other = std::max(best_other, dot(w, data.row(j)));
        const double mu = dot(w, xi) - best_other;
        if (mu <= 0.0) throw_not_extreme(i);
        out.w[i] = std::move(w);
        out.margin[i] = mu;
    }
    return out;
}

namespace {

// Off-diagonal entries of the middle layers: strictly negative so finite
// difference probes never sit on a relu kink. Does not change the function
// or the exact gradients (the channels stay inactive with zero out-weight path).
constexpr double kMidLayerGuard = -0.05;

} // namespace

ModelParams memorize_bias(const LabeledDataset& data, double eps, int depth) {
    const std::size_t n = data.size();
    const Separators sep = find_separators(data);
    const double min_margin = sep.min_margin();
    if (eps == 0.0) eps = min_margin / 1000.0;
    if (eps >= min_margin)
        throw std::invalid_argument("memorize_bias: slack-too-large, eps must stay below the min margin");

    ArchSpec spec{ArchKind::Bias, depth, static_cast<int>(n), static_cast<int>(data.d),
                  Activation::Relu, 0.0};
    ModelParams p = zero_params(spec);
    const int d = spec.input_dim;

    for (std::size_t i = 0; i < n; ++i) {
        const double y = data.labels[i];
        const double ay = std::abs(y);
        const double wx = dot(sep.w[i], data.row(i));
        double x2 = 1.0;
        for (double v : data.row(i)) x2 += v * v;
        if (depth == 2) {
            if (ay == 0.0) continue; // zero rows carry zero-label points
            const double r = std::sqrt(x2);
            const double scale = std::sqrt(r * ay);
            for (int c = 0; c < d; ++c) p.W[0][i * d + c] = scale * sep.w[i][c] / eps;
            p.b1[i] = scale * (-wx + eps) / eps;
            p.W[1][i] = (y > 0 ? 1.0 : -1.0) * std::sqrt(ay / r);
        } else {
            const double r = ay > 0.0 ? std::pow(std::sqrt(x2) / ay, 1.0 / depth) : 1.0;
            const double u = ay > 0.0 ? ay * std::pow(r, depth - 1) : 1.0;
            for (int c = 0; c < d; ++c) p.W[0][i * d + c] = u * sep.w[i][c] / eps;
            p.b1[i] = u * (-wx + eps) / eps;
            for (int k = 1; k < depth - 1; ++k)
                for (std::size_t jj = 0; jj < n; ++jj)
                    p.W[k][jj * n + i] = (jj == i) ? 1.0 / r : kMidLayerGuard;
            p.W[depth - 1][i] = ay > 0.0 ? (y > 0 ? 1.0 : -1.0) / r : 0.0;
        }
    }
    return p;
}

double good_xor_bias_trace(int d, XorRadius choice) {
    const double r2 = choice == XorRadius::EqualityDerived ? std::sqrt(d + 1.0)
                                                           : std::sqrt(d * double(d) + 1.0);
    return 2.0 * (r2 + (d + 1.0) / r2);
}

ModelParams good_xor_bias(int d, int m, XorRadius choice) {
    if (d < 2) throw std::invalid_argument("good_xor_bias: need d >= 2");
    if (m < 4) throw std::invalid_argument("good_xor_bias: need m >= 4");
    const double r = choice == XorRadius::EqualityDerived ? std::pow(d + 1.0, 0.25)
                                                          : std::pow(d * double(d) + 1.0, 0.25);
    ArchSpec spec{ArchKind::Bias, 2, m, d, Activation::Relu, 0.0};
    ModelParams p = zero_params(spec);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const int k = 2 * i + j;
            p.W[0][static_cast<std::size_t>(k) * d + 0] = r * (i == 0 ? 1.0 : -1.0);
            p.W[0][static_cast<std::size_t>(k) * d + 1] = r * (j == 0 ? 1.0 : -1.0);
            p.b1[k] = -r;
            p.W[1][k] = ((i + j) % 2 == 0 ? 1.0 : -1.0) / r;
        }
    return p;
}

ModelParams memorize_simln(const LabeledDataset& data, double ln_eps, double delta) {
    if (ln_eps <= 0.0) throw std::invalid_argument("memorize_simln: ln_eps must be positive");
    const std::size_t n = data.size();
    const Separators sep = find_separators(data);
    const double min_margin = sep.min_margin();
    if (delta == 0.0) delta = min_margin / 1000.0;
    if (delta >= min_margin)
        throw std::invalid_argument("memorize_simln: slack-too-large, delta must stay below the min margin");

    ArchSpec spec{ArchKind::SimLN, 2, static_cast<int>(n), static_cast<int>(data.d),
                  Activation::Relu, ln_eps};
    ModelParams p = zero_params(spec);
    const int d = spec.input_dim;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = data.labels[i];
        if (y == 0.0) continue; // zero row: the sample contributes no gradient at all
        double x2 = 1.0;
        for (double v : data.row(i)) x2 += v * v;
        const double s = std::sqrt(x2) * std::abs(y);
        double r, u;
        if (s > ln_eps) {
            r = 1.0;
            u = 2.0 * ln_eps;
        } else {
            r = std::sqrt(ln_eps / s);
            u = ln_eps * std::sqrt(s / ln_eps);
        }
        const double wx = dot(sep.w[i], data.row(i));
        for (int c = 0; c < d; ++c) p.W[0][i * d + c] = u * sep.w[i][c] / delta;
        p.b1[i] = u * (-wx + delta) / delta;
        p.W[1][i] = r * y;
    }
    return p;
}

ModelParams bad_simln_xor(const LabeledDataset& data, double ln_eps, double delta) {
    if (ln_eps <= 0.0) throw std::invalid_argument("bad_simln_xor: ln_eps must be positive");
    const std::size_t n = data.size();
    const int d = static_cast<int>(data.d);
    for (std::size_t i = 0; i < n; ++i)
        for (double v : data.row(i))
            if (v != 1.0 && v != -1.0)
                throw std::invalid_argument("bad_simln_xor: inputs must be hypercube points");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::equal(data.row(i).begin(), data.row(i).end(), data.row(j).begin()))
                throw std::invalid_argument("bad_simln_xor: duplicate inputs");
    if (delta == 0.0) delta = 2.0 / 1000.0; // hypercube margin for w_i = x_i is 2
    if (delta >= 2.0) throw std::invalid_argument("bad_simln_xor: slack-too-large");

    ArchSpec spec{ArchKind::SimLN, 2, static_cast<int>(n), d, Activation::Relu, ln_eps};
    ModelParams p = zero_params(spec);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = data.row(i);
        for (int c = 0; c < d; ++c) p.W[0][i * d + c] = 2.0 * ln_eps * x[c] / delta;
        p.b1[i] = 2.0 * ln_eps * (-d + delta) / delta;
        p.W[1][i] = data.labels[i];
    }
    return p;
}

ModelParams good_simln_xor(int d, double ln_eps, int m) {
    if (d < 2) throw std::invalid_argument("good_simln_xor: need d >= 2");
    if (m < 4) throw std::invalid_argument("good_simln_xor: need m >= 4");
    if (ln_eps <= 0.0) throw std::invalid_argument("good_simln_xor: ln_eps must be positive");
    ArchSpec spec{ArchKind::SimLN, 2, m, d, Activation::Relu, ln_eps};
    ModelParams p = zero_params(spec);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const int k = 2 * i + j;
            p.W[0][static_cast<std::size_t>(k) * d + 0] = 2.0 * ln_eps * (i == 0 ? 1.0 : -1.0);
            p.W[0][static_cast<std::size_t>(k) * d + 1] = 2.0 * ln_eps * (j == 0 ? 1.0 : -1.0);
            p.b1[k] = -2.0 * ln_eps;
            p.W[1][k] = (i + j) % 2 == 0 ? 1.0 : -1.0;
        }
    return p;
}

ModelParams good_sbn_xor(const LabeledDataset& data, double first_layer_scale, int m,
                         bool* completeness_warn) {
    if (m < 4) throw std::invalid_argument("good_sbn_xor: need m >= 4");
    if (first_layer_scale <= 0.0) throw std::invalid_argument("good_sbn_xor: scale must be positive");
    if (completeness_warn) *completeness_warn = !is_complete_xor(data);
    const int d = static_cast<int>(data.d);
    ArchSpec spec{ArchKind::SimBN, 2, m, d, Activation::Relu, 0.0};
    ModelParams p = zero_params(spec);
    const double s = first_layer_scale;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const int k = 2 * i + j;
            p.W[0][static_cast<std::size_t>(k) * d + 0] = s * (i == 0 ? 1.0 : -1.0);
            p.W[0][static_cast<std::size_t>(k) * d + 1] = s * (j == 0 ? 1.0 : -1.0);
            p.b1[k] = -s;
            // AM-GM equality needs |gamma| = |W2|; the label sign rides on W2
            p.gamma[k] = inv_sqrt2;
            p.W[1][k] = ((i + j) % 2 == 0 ? 1.0 : -1.0) * inv_sqrt2;
        }
    return p;
}

ModelParams good_polygon(const LabeledDataset& data, int s_dims, double R, double eps) {
    const std::size_t n = data.size();
    if (n == 0) throw std::invalid_argument("good_polygon: empty dataset");
    if (s_dims < 1 || static_cast<std::size_t>(s_dims) > data.d)
        throw std::invalid_argument("good_polygon: bad pattern dimension");
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(norm(data.row(i)) - R) > 1e-9 * (1.0 + R))
            throw std::invalid_argument("good_polygon: inputs must share norm R");

    // distinct extreme patterns over the first s coordinates
    std::vector<Vec> patterns;
    std::vector<double> pattern_labels;
    for (std::size_t i = 0; i < n; ++i) {
        auto x = data.row(i);
        Vec v(x.begin(), x.begin() + s_dims);
        bool found = false;
        for (std::size_t k = 0; k < patterns.size(); ++k) {
            double dist2 = 0.0;
            for (int c = 0; c < s_dims; ++c) dist2 += (patterns[k][c] - v[c]) * (patterns[k][c] - v[c]);
            if (dist2 < 1e-18) {
                if (std::abs(pattern_labels[k] - data.labels[i]) > 1e-12)
                    throw std::invalid_argument("good_polygon: inconsistent labels for equal patterns");
                found = true;
                break;
            }
        }
        if (!found) {
            patterns.push_back(std::move(v));
            pattern_labels.push_back(data.labels[i]);
        }
    }

    LabeledDataset proj;
    proj.d = static_cast<std::size_t>(s_dims);
    for (std::size_t k = 0; k < patterns.size(); ++k) proj.push_row(patterns[k], pattern_labels[k]);
    const Separators sep = find_separators(proj);
    if (eps == 0.0) eps = sep.min_margin() / 1000.0;
    if (eps >= sep.min_margin()) throw std::invalid_argument("good_polygon: slack-too-large");

    const int d = static_cast<int>(data.d);
    const int k_count = static_cast<int>(patterns.size());
    ArchSpec spec{ArchKind::Bias, 2, k_count, d, Activation::Relu, 0.0};
    ModelParams p = zero_params(spec);
    const double xnorm = std::sqrt(R * R + 1.0);
    for (int k = 0; k < k_count; ++k) {
        const double y = pattern_labels[k];
        if (y == 0.0) continue;
        const double r = std::sqrt(std::abs(y) * xnorm);
        const double wv = dot(sep.w[k], patterns[k]);
        for (int c = 0; c < s_dims; ++c)
            p.W[0][static_cast<std::size_t>(k) * d + c] = r * sep.w[k][c] / eps;
        p.b1[k] = r * (-wv + eps) / eps;
        p.W[1][k] = y / r;
    }
    return p;
}

namespace {

// Equality in the trace bound pins every active neuron's activation at a
// sample to W2[k] * ||x'||. Neurons therefore come in two shapes: a "solo"
// active at a single sample, and a "domino" whose zero line is parallel to
// the chord of two consecutive same-sign samples (equal activation at both).
// The squared activations a_k solve the per-sample coverage chain
// sum_k a_k = |y_i| * ||x'||; dominos keep the network piecewise linear
// between samples, which is what drives the O(arc^2) generalization error.
struct CircleNeuron {
    double mid = 0;   // direction of the zero-line normal
    double omega = 0; // angular half-width of the active window
    double value = 0; // activation at the covered samples (sqrt of the chain weight)
    double sign = 1;  // shared label sign of the covered samples
};

struct CirclePoint {
    double phi;
    double y;
};

// solves solo_first + a_1 = Y_1, a_{i-1} + a_i = Y_i, a_{m-1} + solo_last = Y_m
// with everything nonnegative; returns false when no slack interval exists
bool solve_path_chain(const std::vector<double>& Y, std::vector<double>& a, double& solo_first,
                      double& solo_last, std::size_t* worst) {
    const std::size_t m = Y.size();
    if (m == 1) {
        a.clear();
        solo_first = Y[0];
        solo_last = 0.0;
        return true;
    }
    // a_i = A_i + (-1)^(i+1) u with u = solo_first and A the alternating sums
    std::vector<double> A(m - 1);
    double run = 0.0;
    double u_lo = 0.0, u_hi = 1e300;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        run = Y[i] - run;
        A[i] = run;
        if (i % 2 == 0) u_hi = std::min(u_hi, A[i]); // a_i = A_i - u >= 0
        else u_lo = std::max(u_lo, -A[i]);           // a_i = A_i + u >= 0
    }
    // solo_last = Y_m - a_{m-1} >= 0
    if ((m - 2) % 2 == 0) u_lo = std::max(u_lo, A[m - 2] - Y[m - 1]);
    else u_hi = std::min(u_hi, Y[m - 1] - A[m - 2]);

    auto assign = [&](double u) {
        solo_first = u;
        a.resize(m - 1);
        for (std::size_t i = 0; i + 1 < m; ++i) a[i] = A[i] + (i % 2 == 0 ? -u : u);
        solo_last = Y[m - 1] - a[m - 2];
    };
    if (u_lo > u_hi) {
        if (worst) {
            assign(std::max(u_lo, 0.0)); // best effort, to locate the violation
            std::size_t arg = 1;
            double slack = 1e300;
            for (std::size_t i = 0; i + 1 < m; ++i)
                if (a[i] < slack) { slack = a[i]; arg = i + 1; }
            *worst = std::min(std::max<std::size_t>(arg, 1), m - 1);
        }
        return false;
    }
    assign(u_hi < 1e290 ? 0.5 * (u_lo + u_hi) : u_lo);
    return true;
}

void emit_run(const std::vector<CirclePoint>& pts, const std::vector<std::size_t>& run, bool cyclic,
              double xnorm, double cross, std::vector<std::pair<std::size_t, CircleNeuron>>& neurons);

// angular gap from pts[i] to the next/previous sample (any label), cyclic
double gap_after(const std::vector<CirclePoint>& pts, std::size_t i) {
    const std::size_t n = pts.size();
    double g = pts[(i + 1) % n].phi - pts[i].phi;
    if (g <= 0) g += 2.0 * M_PI;
    return g;
}

double gap_before(const std::vector<CirclePoint>& pts, std::size_t i) {
    const std::size_t n = pts.size();
    return gap_after(pts, (i + n - 1) % n);
}

void emit_domino(const std::vector<CirclePoint>& pts, std::size_t i, std::size_t j, double a,
                 double sign, double cross, std::vector<std::pair<std::size_t, CircleNeuron>>& neurons) {
    if (a <= 0.0) return;
    double span = pts[j].phi - pts[i].phi;
    if (span <= 0) span += 2.0 * M_PI;
    const double mid = pts[i].phi + 0.5 * span;
    const double gamma = 0.5 * span;
    const double outer = std::min(gap_before(pts, i), gap_after(pts, j));
    const double omega = std::min(gamma + cross * outer, 0.995 * M_PI);
    CircleNeuron nr{mid, omega, std::sqrt(a), sign};
    neurons.push_back({i, nr});
}

void emit_solo(const std::vector<CirclePoint>& pts, std::size_t i, double a, double sign,
               double cross, std::vector<std::pair<std::size_t, CircleNeuron>>& neurons) {
    if (a <= 0.0) return;
    const double omega = cross * std::min(gap_before(pts, i), gap_after(pts, i));
    CircleNeuron nr{pts[i].phi, omega, std::sqrt(a), sign};
    neurons.push_back({i, nr});
}

void emit_path(const std::vector<CirclePoint>& pts, const std::vector<std::size_t>& run,
               double xnorm, double cross, std::vector<std::pair<std::size_t, CircleNeuron>>& neurons) {
    std::vector<double> Y(run.size());
    for (std::size_t k = 0; k < run.size(); ++k) Y[k] = std::abs(pts[run[k]].y) * xnorm;
    const double sign = pts[run[0]].y > 0 ? 1.0 : -1.0;
    std::vector<double> a;
    double solo_first = 0, solo_last = 0;
    std::size_t worst = 0;
    if (solve_path_chain(Y, a, solo_first, solo_last, &worst)) {
        emit_solo(pts, run[0], solo_first, sign, cross, neurons);
        for (std::size_t k = 0; k + 1 < run.size(); ++k)
            emit_domino(pts, run[k], run[k + 1], a[k], sign, cross, neurons);
        if (run.size() > 1) emit_solo(pts, run.back(), solo_last, sign, cross, neurons);
        return;
    }
    // infeasible chain: split at the most violated sample and recurse
    std::vector<std::size_t> left(run.begin(), run.begin() + worst);
    std::vector<std::size_t> right(run.begin() + worst, run.end());
    emit_path(pts, left, xnorm, cross, neurons);
    emit_path(pts, right, xnorm, cross, neurons);
}

void emit_run(const std::vector<CirclePoint>& pts, const std::vector<std::size_t>& run, bool cyclic,
              double xnorm, double cross, std::vector<std::pair<std::size_t, CircleNeuron>>& neurons) {
    if (!cyclic || run.size() < 3) {
        emit_path(pts, run, xnorm, cross, neurons);
        return;
    }
    const double sign = pts[run[0]].y > 0 ? 1.0 : -1.0;
    const std::size_t m = run.size();
    if (m % 2 == 1) {
        // odd cyclic chain a_{k} + a_{k+1} = Y_{k+1} has the closed form below
        std::vector<double> Y(m);
        for (std::size_t k = 0; k < m; ++k) Y[k] = std::abs(pts[run[k]].y) * xnorm;
        double alt = 0.0;
        for (std::size_t k = 0; k < m; ++k) alt += (k % 2 == 0 ? Y[k] : -Y[k]);
        std::vector<double> a(m);
        a[0] = 0.5 * alt; // domino covering (run[m-1], run[0])... shifted below
        bool ok = a[0] >= 0.0;
        for (std::size_t k = 1; k < m && ok; ++k) {
            a[k] = Y[k - 1] - a[k - 1];
            ok = a[k] >= -1e-15;
        }
        // a[k] covers the pair (run[k-1], run[k]) with a[0] the wrap pair
        if (ok) {
            for (std::size_t k = 0; k < m; ++k) {
                const std::size_t i = run[(k + m - 1) % m], j = run[k];
                emit_domino(pts, i, j, std::max(a[k], 0.0), sign, cross, neurons);
            }
            return;
        }
    }
    // even cycle or infeasible: open the cycle at the smallest |y|
    std::size_t cut = 0;
    for (std::size_t k = 1; k < m; ++k)
        if (std::abs(pts[run[k]].y) < std::abs(pts[run[cut]].y)) cut = k;
    std::vector<std::size_t> path;
    for (std::size_t k = 0; k < m; ++k) path.push_back(run[(cut + k) % m]);
    emit_path(pts, path, xnorm, cross, neurons);
}

} // namespace

ModelParams good_circle(const LabeledDataset& data, double R, double crossing_frac) {
    const std::size_t n = data.size();
    if (n < 3) throw std::invalid_argument("good_circle: need n >= 3 points");
    if (crossing_frac <= 0.05 || crossing_frac >= 0.95)
        throw std::invalid_argument("good_circle: crossing_frac must lie in (0.05, 0.95)");
    std::vector<CirclePoint> pts(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = data.row(i);
        if (std::abs(x[0] * x[0] + x[1] * x[1] - 1.0) > 1e-9)
            throw std::invalid_argument("good_circle: first two coordinates must lie on the unit circle");
        if (std::abs(norm(x) - R) > 1e-9 * (1.0 + R))
            throw std::invalid_argument("good_circle: inputs must share norm R");
        pts[i] = {std::atan2(x[1], x[0]), data.labels[i]};
    }
    std::sort(pts.begin(), pts.end(),
              [](const CirclePoint& a, const CirclePoint& b) { return a.phi < b.phi; });
    for (std::size_t i = 0; i < n; ++i) {
        const double raw = (i + 1 < n) ? pts[i + 1].phi - pts[i].phi
                                       : pts[0].phi + 2.0 * M_PI - pts[n - 1].phi;
        if (raw < 1e-12) throw std::invalid_argument("good_circle: duplicate angles");
    }

    const double xnorm = std::sqrt(R * R + 1.0);

    // maximal same-sign runs of consecutive samples (zero labels break runs)
    std::vector<std::pair<std::size_t, CircleNeuron>> neurons;
    std::vector<bool> used(n, false);
    bool all_same_sign = true;
    for (std::size_t i = 0; i < n; ++i)
        all_same_sign = all_same_sign && pts[i].y != 0.0 &&
                        (pts[i].y > 0) == (pts[0].y > 0);
    if (all_same_sign) {
        std::vector<std::size_t> run(n);
        for (std::size_t i = 0; i < n; ++i) run[i] = i;
        emit_run(pts, run, /*cyclic=*/true, xnorm, crossing_frac, neurons);
    } else {
        for (std::size_t start = 0; start < n; ++start) {
            if (used[start] || pts[start].y == 0.0) continue;
            // only begin a run at a sign boundary
            const std::size_t prev = (start + n - 1) % n;
            const bool boundary = pts[prev].y == 0.0 ||
                                  (pts[prev].y > 0) != (pts[start].y > 0);
            if (!boundary) continue;
            std::vector<std::size_t> run;
            std::size_t i = start;
            while (!used[i] && pts[i].y != 0.0 && (pts[i].y > 0) == (pts[start].y > 0)) {
                run.push_back(i);
                used[i] = true;
                i = (i + 1) % n;
                if (i == start) break;
            }
            emit_run(pts, run, /*cyclic=*/false, xnorm, crossing_frac, neurons);
        }
    }

    const int d = static_cast<int>(data.d);
    const int width = std::max<int>(1, static_cast<int>(neurons.size()));
    ArchSpec spec{ArchKind::Bias, 2, width, d, Activation::Relu, 0.0};
    ModelParams p = zero_params(spec);
    for (std::size_t k = 0; k < neurons.size(); ++k) {
        const std::size_t i = neurons[k].first; // one covered sample, fixing the scale
        const CircleNeuron& nr = neurons[k].second;
        double offset = pts[i].phi - nr.mid;
        while (offset > M_PI) offset -= 2.0 * M_PI;
        while (offset < -M_PI) offset += 2.0 * M_PI;
        // activation kappa * (cos(phi - mid) - cos(omega)) equals `value` at
        // the covered samples (both dominoe ends sit at the same |offset|)
        const double denom = std::cos(offset) - std::cos(nr.omega);
        const double kappa = nr.value / denom;
        p.W[0][k * d + 0] = kappa * std::cos(nr.mid);
        p.W[0][k * d + 1] = kappa * std::sin(nr.mid);
        p.b1[k] = -kappa * std::cos(nr.omega);
        p.W[1][k] = nr.sign * nr.value / xnorm;
    }
    return p;
}

double one_hot_violation(const ArchSpec& spec, const ModelParams& p, const LabeledDataset& data) {
    double worst = 0.0;
    const int m = spec.width, d = spec.input_dim;
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto x = data.row(i);
        Vec h(m);
        for (int j = 0; j < m; ++j) {
            double s = spec.has_bias() ? p.b1[j] : 0.0;
            const double* row = p.W[0].data() + static_cast<std::size_t>(j) * d;
            for (int c = 0; c < d; ++c) s += row[c] * x[c];
            h[j] = s > 0.0 ? s : 0.0;
        }
        for (int layer = 0;; ++layer) {
            int active = 0;
            double second = 0.0, best = 0.0;
            for (int j = 0; j < m; ++j) {
                if (h[j] > 0.0) {
                    ++active;
                    if (h[j] > best) { second = best; best = h[j]; }
                    else second = std::max(second, h[j]);
                }
            }
            if (active == 0 && data.labels[i] != 0.0) worst = std::max(worst, 1.0);
            if (active > 1) worst = std::max(worst, second);
            if (layer + 2 >= spec.depth) break;
            Vec next(m);
            for (int j = 0; j < m; ++j) {
                const double* row = p.W[layer + 1].data() + static_cast<std::size_t>(j) * m;
                double s = 0.0;
                for (int c = 0; c < m; ++c) s += row[c] * h[c];
                next[j] = s > 0.0 ? s : 0.0;
            }
            h.swap(next);
        }
    }
    return worst;
}

ConstructionCertificate certify(const ArchSpec& spec, const ModelParams& p,
                                const LabeledDataset& train, const LabeledDataset& eval_set,
                                const LossKind& loss) {
    ConstructionCertificate cert;
    cert.interpolation_residual = interpolation_residual(spec, p, train, loss);
    cert.achieved_trace = exact_trace(spec, p, train, loss, std::max(1e-3, 2.0 * cert.interpolation_residual));
    bool warn = false;
    const auto tmin = theoretical_min(spec, train, &warn);
    cert.theoretical_min = tmin.value_or(0.0);
    cert.relative_gap = std::abs(cert.achieved_trace - cert.theoretical_min) /
                        std::max(cert.theoretical_min, 1e-12);
    BatchContext store;
    const BatchContext* ctx = nullptr;
    if (spec.kind == ArchKind::SimBN) {
        store = refresh_batch_context(spec, p, train);
        ctx = &store;
    }
    cert.zero_one_error = zero_one_error(spec, p, eval_set, ctx);
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < eval_set.size(); ++i)
        if (std::abs(forward(spec, p, eval_set.row(i), ctx)) < 1e-9) ++zeros;
    cert.off_support_zero_fraction = static_cast<double>(zeros) / eval_set.size();
    return cert;
}

std::string certificate_csv_header() {
    return "construction,interpolation_residual,achieved_trace,theoretical_min,relative_gap,"
           "zero_one_error,off_support_zero_fraction";
}

std::string certificate_csv_row(const std::string& name, const ConstructionCertificate& c) {
    std::ostringstream os;
    os.precision(17);
    os << name << "," << c.interpolation_residual << "," << c.achieved_trace << ","
       << c.theoretical_min << "," << c.relative_gap << "," << c.zero_one_error << ","
       << c.off_support_zero_fraction;
    return os.str();
}

} // namespace flatlab
