#include "flatlab/model.hpp"

#include <cmath>
#include <stdexcept>

#include "flatlab/rng.hpp"

namespace flatlab {

std::string to_string(ArchKind k) {
    switch (k) {
    case ArchKind::NoBias: return "nobias";
    case ArchKind::Bias: return "bias";
    case ArchKind::SimBN: return "simbn";
    case ArchKind::SimLN: return "simln";
    }
    return "nobias";
}

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "softplus"; }

ArchKind arch_from_string(const std::string& s) {
    if (s == "nobias") return ArchKind::NoBias;
    if (s == "bias") return ArchKind::Bias;
    if (s == "simbn") return ArchKind::SimBN;
    if (s == "simln") return ArchKind::SimLN;
    throw std::invalid_argument("unknown architecture: " + s);
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "softplus") return Activation::Softplus;
    throw std::invalid_argument("unknown activation: " + s);
}

void ArchSpec::validate() const {
    if (width < 1 || input_dim < 1) throw std::invalid_argument("ArchSpec: width/input_dim must be >= 1");
    if (depth < 2) throw std::invalid_argument("ArchSpec: depth must be >= 2");
    if (depth > 2 && kind != ArchKind::Bias)
        throw std::invalid_argument("ArchSpec: depth > 2 only supported for the Bias family");
    if (kind == ArchKind::SimLN && ln_epsilon <= 0.0)
        throw std::invalid_argument("ArchSpec: SimLN requires ln_epsilon > 0");
    if ((kind == ArchKind::SimBN || kind == ArchKind::SimLN) && act != Activation::Relu)
        throw std::invalid_argument("ArchSpec: normalized architectures use relu");
}

std::size_t ArchSpec::param_count() const {
    std::size_t n = static_cast<std::size_t>(width) * input_dim; // W1
    if (has_bias()) n += width;                                  // b1
    if (kind == ArchKind::SimBN) n += width;                     // gamma
    for (int k = 1; k < depth - 1; ++k) n += static_cast<std::size_t>(width) * width;
    n += width; // WD
    return n;
}

ModelParams zero_params(const ArchSpec& spec) {
    spec.validate();
    ModelParams p;
    const int m = spec.width, d = spec.input_dim;
    p.W.resize(spec.depth);
    p.W[0].assign(static_cast<std::size_t>(m) * d, 0.0);
    for (int k = 1; k < spec.depth - 1; ++k) p.W[k].assign(static_cast<std::size_t>(m) * m, 0.0);
    p.W[spec.depth - 1].assign(m, 0.0);
    if (spec.has_bias()) p.b1.assign(m, 0.0);
    if (spec.kind == ArchKind::SimBN) p.gamma.assign(m, 0.0);
    return p;
}

Vec flatten(const ArchSpec& spec, const ModelParams& p) {
    Vec out;
    out.reserve(spec.param_count());
    out.insert(out.end(), p.W[0].begin(), p.W[0].end());
    out.insert(out.end(), p.b1.begin(), p.b1.end());
    out.insert(out.end(), p.gamma.begin(), p.gamma.end());
    for (int k = 1; k < spec.depth; ++k) out.insert(out.end(), p.W[k].begin(), p.W[k].end());
    return out;
}

ModelParams unflatten(const ArchSpec& spec, const Vec& theta) {
    ModelParams p = zero_params(spec);
    unflatten_into(spec, theta, p);
    return p;
}

void unflatten_into(const ArchSpec& spec, const Vec& theta, ModelParams& p) {
    if (theta.size() != spec.param_count())
        throw std::invalid_argument("unflatten: size mismatch");
    std::size_t pos = 0;
    auto take = [&](Vec& dst) {
        std::copy(theta.begin() + pos, theta.begin() + pos + dst.size(), dst.begin());
        pos += dst.size();
    };
    take(p.W[0]);
    if (spec.has_bias()) take(p.b1);
    if (spec.kind == ArchKind::SimBN) take(p.gamma);
    for (int k = 1; k < spec.depth; ++k) take(p.W[k]);
}

namespace {

inline double act_value(Activation a, double z) {
    if (a == Activation::Relu) return z > 0.0 ? z : 0.0;
    // stable softplus: log(1+e^z)
    return std::log1p(std::exp(-std::abs(z))) + (z > 0.0 ? z : 0.0);
}

inline double act_deriv(Activation a, double z) {
    if (a == Activation::Relu) return z > 0.0 ? 1.0 : 0.0;
    return 1.0 / (1.0 + std::exp(-z)); // sigmoid
}

// four-way accumulator dot product: breaks the serial FP dependency chain
// (and fixes the summation order, keeping results reproducible)
inline double dot4(const double* a, const double* b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int c = 0;
    for (; c + 4 <= n; c += 4) {
        s0 += a[c] * b[c];
        s1 += a[c + 1] * b[c + 1];
        s2 += a[c + 2] * b[c + 2];
        s3 += a[c + 3] * b[c + 3];
    }
    double s = (s0 + s1) + (s2 + s3);
    for (; c < n; ++c) s += a[c] * b[c];
    return s;
}

// first layer pre-activations, z[j] = W1[j,:].x + b1[j]
void layer1_pre(const ArchSpec& spec, const ModelParams& p, std::span<const double> x, Vec& z) {
    const int m = spec.width, d = spec.input_dim;
    z.resize(m);
    const bool bias = spec.has_bias();
    for (int j = 0; j < m; ++j) {
        const double* row = p.W[0].data() + static_cast<std::size_t>(j) * d;
        z[j] = (bias ? p.b1[j] : 0.0) + dot4(row, x.data(), d);
    }
}

void check_input(const ArchSpec& spec, std::span<const double> x, const BatchContext* ctx) {
    if (static_cast<int>(x.size()) != spec.input_dim)
        throw std::invalid_argument("forward: input dimension mismatch");
    if (spec.kind == ArchKind::SimBN && (ctx == nullptr || static_cast<int>(ctx->a.size()) != spec.width))
        throw std::invalid_argument("forward: SimBN requires a BatchContext over a reference dataset");
}

} // namespace

BatchContext refresh_batch_context(const ArchSpec& spec, const ModelParams& p,
                                   const LabeledDataset& data) {
    if (spec.kind != ArchKind::SimBN)
        throw std::invalid_argument("refresh_batch_context: only meaningful for SimBN");
    if (spec.width < 1) throw std::invalid_argument("refresh_batch_context: zero-width network");
    const int m = spec.width, d = spec.input_dim;
    const std::size_t n = data.size();
    BatchContext ctx;
    ctx.a.assign(m, 0.0);
    ctx.da.assign(static_cast<std::size_t>(m) * (d + 1), 0.0);
    Vec z;
    // a[j]^2 = (1/n) sum_i relu(z_i[j])^2; da accumulates (1/n) sum relu*1[z>0]*x
    for (std::size_t i = 0; i < n; ++i) {
        auto x = data.row(i);
        layer1_pre(spec, p, x, z);
        for (int j = 0; j < m; ++j) {
            if (z[j] <= 0.0) continue;
            ctx.a[j] += z[j] * z[j];
            double* drow = ctx.da.data() + static_cast<std::size_t>(j) * (d + 1);
            for (int c = 0; c < d; ++c) drow[c] += z[j] * x[c];
            drow[d] += z[j];
        }
    }
    for (int j = 0; j < m; ++j) {
        ctx.a[j] = std::sqrt(ctx.a[j] / static_cast<double>(n));
        double* drow = ctx.da.data() + static_cast<std::size_t>(j) * (d + 1);
        if (ctx.a[j] > 0.0) {
            const double inv = 1.0 / (ctx.a[j] * static_cast<double>(n));
            for (int c = 0; c <= d; ++c) drow[c] *= inv;
        } else {
            for (int c = 0; c <= d; ++c) drow[c] = 0.0;
        }
    }
    return ctx;
}

double forward(const ArchSpec& spec, const ModelParams& p, std::span<const double> x,
               const BatchContext* ctx) {
    check_input(spec, x, ctx);
    const int m = spec.width;
    Vec z;
    layer1_pre(spec, p, x, z);

    switch (spec.kind) {
    case ArchKind::NoBias:
    case ArchKind::Bias: {
        Vec h(m);
        for (int j = 0; j < m; ++j) h[j] = act_value(spec.act, z[j]);
        for (int k = 1; k < spec.depth - 1; ++k) {
            Vec next(m);
            for (int j = 0; j < m; ++j) {
                const double* row = p.W[k].data() + static_cast<std::size_t>(j) * m;
                next[j] = act_value(spec.act, dot4(row, h.data(), m));
            }
            h.swap(next);
        }
        return dot4(p.W[spec.depth - 1].data(), h.data(), m);
    }
    case ArchKind::SimBN: {
        double out = 0.0;
        for (int j = 0; j < m; ++j) {
            if (ctx->a[j] <= 0.0) continue; // dead channel, 0/0 := 0
            const double h = z[j] > 0.0 ? z[j] : 0.0;
            out += p.W[1][j] * p.gamma[j] * h / ctx->a[j];
        }
        return out;
    }
    case ArchKind::SimLN: {
        double norm2 = 0.0, dot = 0.0;
        for (int j = 0; j < m; ++j) {
            const double h = z[j] > 0.0 ? z[j] : 0.0;
            norm2 += h * h;
            dot += p.W[1][j] * h;
        }
        const double den = std::max(std::sqrt(norm2), spec.ln_epsilon);
        return dot / den;
    }
    }
    return 0.0;
}

void per_example_grad(const ArchSpec& spec, const ModelParams& p, std::span<const double> x,
                      const BatchContext* ctx, Vec& g) {
    check_input(spec, x, ctx);
    const int m = spec.width, d = spec.input_dim;
    g.assign(spec.param_count(), 0.0);
    Vec z;
    layer1_pre(spec, p, x, z);

    const std::size_t off_w1 = 0;
    const std::size_t off_b1 = static_cast<std::size_t>(m) * d;
    const std::size_t off_gamma = off_b1 + (spec.has_bias() ? m : 0);
    std::size_t off_mid = off_gamma + (spec.kind == ArchKind::SimBN ? m : 0);

    switch (spec.kind) {
    case ArchKind::NoBias:
    case ArchKind::Bias: {
        const int D = spec.depth;
        std::vector<Vec> acts(D); // acts[k] = activations after layer k+1's nonlinearity
        std::vector<Vec> pres(D - 1);
        pres[0] = z;
        acts[0].resize(m);
        for (int j = 0; j < m; ++j) acts[0][j] = act_value(spec.act, z[j]);
        for (int k = 1; k < D - 1; ++k) {
            pres[k].resize(m);
            acts[k].resize(m);
            for (int j = 0; j < m; ++j) {
                const double* row = p.W[k].data() + static_cast<std::size_t>(j) * m;
                const double s = dot4(row, acts[k - 1].data(), m);
                pres[k][j] = s;
                acts[k][j] = act_value(spec.act, s);
            }
        }
        // output layer
        std::size_t off_last = off_mid;
        for (int k = 1; k < D - 1; ++k) off_last += static_cast<std::size_t>(m) * m;
        for (int j = 0; j < m; ++j) g[off_last + j] = acts[D - 2][j];
        // backprop
        Vec delta(m); // d out / d acts[k]
        for (int j = 0; j < m; ++j) delta[j] = p.W[D - 1][j];
        for (int k = D - 2; k >= 1; --k) {
            Vec e(m);
            for (int j = 0; j < m; ++j) e[j] = delta[j] * act_deriv(spec.act, pres[k][j]);
            std::size_t off_k = off_mid;
            for (int kk = 1; kk < k; ++kk) off_k += static_cast<std::size_t>(m) * m;
            for (int j = 0; j < m; ++j) {
                double* row = g.data() + off_k + static_cast<std::size_t>(j) * m;
                for (int c = 0; c < m; ++c) row[c] = e[j] * acts[k - 1][c];
            }
            Vec nd(m, 0.0);
            for (int j = 0; j < m; ++j) {
                const double* row = p.W[k].data() + static_cast<std::size_t>(j) * m;
                for (int c = 0; c < m; ++c) nd[c] += row[c] * e[j];
            }
            delta.swap(nd);
        }
        for (int j = 0; j < m; ++j) {
            const double e = delta[j] * act_deriv(spec.act, pres[0][j]);
            double* row = g.data() + off_w1 + static_cast<std::size_t>(j) * d;
            for (int c = 0; c < d; ++c) row[c] = e * x[c];
            if (spec.has_bias()) g[off_b1 + j] = e;
        }
        return;
    }
    case ArchKind::SimBN: {
        for (int j = 0; j < m; ++j) {
            if (ctx->a[j] <= 0.0) continue; // dead channel carries no gradient
            const double aj = ctx->a[j];
            const double h = z[j] > 0.0 ? z[j] : 0.0;
            const double ratio = h / aj;
            g[off_gamma + j] = p.W[1][j] * ratio;
            g[off_mid + j] = p.gamma[j] * ratio;
            const double wg = p.W[1][j] * p.gamma[j];
            const double* drow = ctx->da.data() + static_cast<std::size_t>(j) * (d + 1);
            double* grow = g.data() + off_w1 + static_cast<std::size_t>(j) * d;
            const double ind = z[j] > 0.0 ? 1.0 : 0.0;
            for (int c = 0; c < d; ++c) {
                double v = ind * x[c] / aj;
                if (!ctx->stop_grad) v -= ratio * drow[c] / aj;
                grow[c] = wg * v;
            }
            double vb = ind / aj;
            if (!ctx->stop_grad) vb -= ratio * drow[d] / aj;
            g[off_b1 + j] = wg * vb;
        }
        return;
    }
    case ArchKind::SimLN: {
        Vec h(m);
        double norm2 = 0.0, dot = 0.0;
        for (int j = 0; j < m; ++j) {
            h[j] = z[j] > 0.0 ? z[j] : 0.0;
            norm2 += h[j] * h[j];
            dot += p.W[1][j] * h[j];
        }
        const double nrm = std::sqrt(norm2);
        const double den = std::max(nrm, spec.ln_epsilon);
        for (int j = 0; j < m; ++j) g[off_mid + j] = h[j] / den;
        for (int j = 0; j < m; ++j) {
            if (z[j] <= 0.0) continue;
            double dfdh = p.W[1][j] / den;
            if (nrm > spec.ln_epsilon) dfdh -= dot * h[j] / (den * den * den);
            double* grow = g.data() + off_w1 + static_cast<std::size_t>(j) * d;
            for (int c = 0; c < d; ++c) grow[c] = dfdh * x[c];
            g[off_b1 + j] = dfdh;
        }
        return;
    }
    }
}

Vec per_example_grad(const ArchSpec& spec, const ModelParams& p, std::span<const double> x,
                     const BatchContext* ctx) {
    Vec g;
    per_example_grad(spec, p, x, ctx, g);
    return g;
}

ModelParams init_params(const ArchSpec& spec, InitScale mode, std::uint64_t seed) {
    spec.validate();
    ModelParams p = zero_params(spec);
    Rng rng = make_rng(derive_seed(seed, 0x21));
    if (mode == InitScale::UniformFanin) {
        const double a1 = 1.0 / std::sqrt(static_cast<double>(spec.input_dim));
        for (auto& v : p.W[0]) v = a1 * (2.0 * uniform01(rng) - 1.0);
        for (auto& v : p.b1) v = a1 * (2.0 * uniform01(rng) - 1.0);
        const double am = 1.0 / std::sqrt(static_cast<double>(spec.width));
        for (int k = 1; k < spec.depth; ++k)
            for (auto& v : p.W[k]) v = am * (2.0 * uniform01(rng) - 1.0);
    } else {
        const double s1 = std::sqrt(2.0 / spec.input_dim);
        for (auto& v : p.W[0]) v = s1 * gaussian(rng);
        for (auto& v : p.b1) v = s1 * gaussian(rng);
        const double sm = std::sqrt(2.0 / spec.width);
        for (int k = 1; k < spec.depth; ++k)
            for (auto& v : p.W[k]) v = sm * gaussian(rng);
        if (mode == InitScale::SimlnDownscale) {
            for (auto& v : p.W[0]) v /= 100.0;
            for (auto& v : p.b1) v /= 100.0;
        }
    }
    for (auto& v : p.gamma) v = 1.0;
    return p;
}

} // namespace flatlab
