#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flatlab/constructions.hpp"
#include "flatlab/model.hpp"
#include "flatlab/rng.hpp"

using namespace flatlab;

namespace {

// central finite differences of the scalar output w.r.t. flat parameters;
// SimBN contexts are rebuilt at every probe point so the batch-statistic path
// is part of the derivative being checked
Vec fd_output_grad(const ArchSpec& spec, const ModelParams& p, std::span<const double> x,
                   const LabeledDataset* ref, double h = 1e-5) {
    Vec theta = flatten(spec, p);
    Vec g(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const double saved = theta[k];
        theta[k] = saved + h;
        ModelParams up = unflatten(spec, theta);
        BatchContext cu;
        const BatchContext* pu = nullptr;
        if (spec.kind == ArchKind::SimBN) { cu = refresh_batch_context(spec, up, *ref); pu = &cu; }
        const double fu = forward(spec, up, x, pu);
        theta[k] = saved - h;
        ModelParams dn = unflatten(spec, theta);
        BatchContext cd;
        const BatchContext* pd = nullptr;
        if (spec.kind == ArchKind::SimBN) { cd = refresh_batch_context(spec, dn, *ref); pd = &cd; }
        const double fdn = forward(spec, dn, x, pd);
        theta[k] = saved;
        g[k] = (fu - fdn) / (2 * h);
    }
    return g;
}

double rel_err(const Vec& a, const Vec& b) {
    double diff = 0, norm = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        norm += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

// inputs jittered away from relu kinks: resample until every first-layer
// pre-activation clears the margin
LabeledDataset kink_free_inputs(const ArchSpec& spec, const ModelParams& p, std::size_t n,
                                std::uint64_t seed, double margin = 1e-3) {
    Rng rng = make_rng(seed);
    LabeledDataset data;
    data.d = static_cast<std::size_t>(spec.input_dim);
    while (data.size() < n) {
        Vec x(data.d);
        for (auto& v : x) v = gaussian(rng);
        bool ok = true;
        for (int j = 0; j < spec.width && ok; ++j) {
            double z = spec.has_bias() ? p.b1[j] : 0.0;
            for (int c = 0; c < spec.input_dim; ++c)
                z += p.W[0][static_cast<std::size_t>(j) * spec.input_dim + c] * x[c];
            if (std::abs(z) < margin) ok = false;
        }
        if (ok) data.push_row(x, 1.0);
    }
    return data;
}

} // namespace

TEST_CASE("identity-weight forward values") {
    ArchSpec spec{ArchKind::NoBias, 2, 2, 2, Activation::Relu, 0.0};
    ModelParams p = zero_params(spec);
    p.W[0] = {1, 0, 0, 1}; // identity
    p.W[1] = {1, 1};
    const Vec x{1.0, -1.0};
    CHECK(forward(spec, p, x) == 1.0); // relu(1) + relu(-1)
}

TEST_CASE("four-neuron xor interpolant evaluates to the parity on d=2") {
    const ModelParams p = good_xor_bias(2);
    ArchSpec spec{ArchKind::Bias, 2, 4, 2, Activation::Relu, 0.0};
    const double pts[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
    const double want[4] = {1, -1, -1, 1};
    for (int i = 0; i < 4; ++i) {
        const Vec x{pts[i][0], pts[i][1]};
        CHECK(forward(spec, p, x) == doctest::Approx(want[i]).epsilon(1e-14));
    }
}

TEST_CASE("sim-LN xor interpolant outputs the exact parity on the hypercube") {
    const int d = 5;
    ArchSpec spec{ArchKind::SimLN, 2, 4, d, Activation::Relu, 0.5};
    const ModelParams p = good_simln_xor(d, 0.5);
    const auto cube = enumerate_hypercube(d);
    for (std::size_t i = 0; i < cube.size(); ++i) {
        const double f = forward(spec, p, cube.row(i));
        CHECK(f == doctest::Approx(cube.labels[i]).epsilon(1e-14));
        CHECK((f == 1.0 || f == -1.0));
    }
}

TEST_CASE("single-neuron gradient in the linear regime") {
    ArchSpec spec{ArchKind::NoBias, 2, 1, 3, Activation::Relu, 0.0};
    ModelParams p = zero_params(spec);
    p.W[0] = {1, 0, 0};
    p.W[1] = {1};
    const Vec x{0.7, -0.3, 0.5}; // x[0] > 0, neuron active
    const Vec g = per_example_grad(spec, p, x);
    CHECK(g[0] == 0.7); // dW1 = W2 * x
    CHECK(g[1] == -0.3);
    CHECK(g[2] == 0.5);
    CHECK(g[3] == 0.7); // dW2 = relu(W1 x) = x[0]
}

TEST_CASE("hand gradients match output finite differences for every architecture") {
    struct Case { ArchKind kind; int depth; Activation act; double ln_eps; };
    const Case cases[] = {
        {ArchKind::NoBias, 2, Activation::Relu, 0.0},
        {ArchKind::NoBias, 2, Activation::Softplus, 0.0},
        {ArchKind::Bias, 2, Activation::Relu, 0.0},
        {ArchKind::Bias, 2, Activation::Softplus, 0.0},
        {ArchKind::Bias, 3, Activation::Relu, 0.0},
        {ArchKind::Bias, 3, Activation::Softplus, 0.0},
        {ArchKind::SimBN, 2, Activation::Relu, 0.0},
        {ArchKind::SimLN, 2, Activation::Relu, 0.3},
        {ArchKind::SimLN, 2, Activation::Relu, 30.0}, // below-floor branch
    };
    int idx = 0;
    for (const auto& c : cases) {
        ArchSpec spec{c.kind, c.depth, 4, 4, c.act, c.ln_eps};
        const ModelParams p = init_params(spec, InitScale::He, 100 + idx);
        const LabeledDataset ref = kink_free_inputs(spec, p, 6, 200 + idx);
        BatchContext ctx;
        const BatchContext* pc = nullptr;
        if (c.kind == ArchKind::SimBN) { ctx = refresh_batch_context(spec, p, ref); pc = &ctx; }
        for (std::size_t i = 0; i < 3; ++i) {
            const Vec analytic = per_example_grad(spec, p, ref.row(i), pc);
            const Vec numeric = fd_output_grad(spec, p, ref.row(i), &ref);
            CHECK(rel_err(analytic, numeric) < 1e-6);
        }
        ++idx;
    }
}

TEST_CASE("sim-LN interpolant has unit per-example gradient norm") {
    const int d = 6;
    ArchSpec spec{ArchKind::SimLN, 2, 4, d, Activation::Relu, 0.4};
    const ModelParams p = good_simln_xor(d, 0.4);
    const auto cube = enumerate_hypercube(d);
    for (std::size_t i = 0; i < cube.size(); i += 7) {
        const Vec g = per_example_grad(spec, p, cube.row(i));
        double n2 = 0;
        for (double v : g) n2 += v * v;
        CHECK(n2 == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("batch context denominators") {
    {
        ArchSpec spec{ArchKind::SimBN, 2, 3, 2, Activation::Relu, 0.0};
        const ModelParams p = zero_params(spec);
        const auto data = sample_xor(2, 8, 0);
        const auto ctx = refresh_batch_context(spec, p, data);
        for (double a : ctx.a) CHECK(a == 0.0);
    }
    {
        // single neuron with pre-activation 1 on every point: a = 1
        ArchSpec spec{ArchKind::SimBN, 2, 1, 2, Activation::Relu, 0.0};
        ModelParams p = zero_params(spec);
        p.b1[0] = 1.0;
        p.gamma[0] = 1.0;
        const auto data = sample_xor(2, 16, 1);
        const auto ctx = refresh_batch_context(spec, p, data);
        CHECK(ctx.a[0] == doctest::Approx(1.0).epsilon(1e-15));
    }
    {
        // the 4-neuron interpolant sees one quarter of a complete set per channel
        const auto data = build_complete_xor_set(6);
        ArchSpec spec{ArchKind::SimBN, 2, 4, 6, Activation::Relu, 0.0};
        const ModelParams p = good_sbn_xor(data, 3.0);
        const auto ctx = refresh_batch_context(spec, p, data);
        for (int j = 1; j < 4; ++j) CHECK(ctx.a[j] == doctest::Approx(ctx.a[0]).epsilon(1e-12));
        CHECK(ctx.a[0] == doctest::Approx(3.0 / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("initialization statistics and determinism") {
    ArchSpec spec{ArchKind::Bias, 2, 200, 50, Activation::Relu, 0.0};
    const ModelParams a = init_params(spec, InitScale::He, 9);
    const ModelParams b = init_params(spec, InitScale::He, 9);
    CHECK(a.W[0] == b.W[0]);
    CHECK(a.b1 == b.b1);
    CHECK(a.W[1] == b.W[1]);

    double s2 = 0;
    for (double v : a.W[0]) s2 += v * v;
    const double std_measured = std::sqrt(s2 / a.W[0].size());
    CHECK(std::abs(std_measured - std::sqrt(2.0 / 50)) / std::sqrt(2.0 / 50) < 0.05);

    const ModelParams down = init_params(spec, InitScale::SimlnDownscale, 9);
    for (std::size_t k = 0; k < a.W[0].size(); ++k)
        CHECK(down.W[0][k] == doctest::Approx(a.W[0][k] / 100.0).epsilon(1e-12));
}

TEST_CASE("flatten and unflatten round trip exactly for every architecture") {
    const ArchSpec specs[] = {
        {ArchKind::NoBias, 2, 5, 3, Activation::Relu, 0.0},
        {ArchKind::Bias, 2, 5, 3, Activation::Relu, 0.0},
        {ArchKind::Bias, 4, 5, 3, Activation::Relu, 0.0},
        {ArchKind::SimBN, 2, 5, 3, Activation::Relu, 0.0},
        {ArchKind::SimLN, 2, 5, 3, Activation::Relu, 0.1},
    };
    for (const auto& spec : specs) {
        const ModelParams p = init_params(spec, InitScale::He, 4);
        const Vec theta = flatten(spec, p);
        CHECK(theta.size() == spec.param_count());
        const ModelParams q = unflatten(spec, theta);
        CHECK(flatten(spec, q) == theta);
    }
}

TEST_CASE("relu rescaling symmetry leaves the no-bias output unchanged") {
    ArchSpec spec{ArchKind::NoBias, 2, 6, 4, Activation::Relu, 0.0};
    const ModelParams p = init_params(spec, InitScale::He, 12);
    ModelParams q = p;
    const double c = 3.7;
    for (auto& v : q.W[0]) v *= c;
    for (auto& v : q.W[1]) v /= c;
    Rng rng = make_rng(5);
    for (int t = 0; t < 20; ++t) {
        Vec x(4);
        for (auto& v : x) v = gaussian(rng);
        CHECK(forward(spec, q, x) == doctest::Approx(forward(spec, p, x)).epsilon(1e-12));
    }
}

TEST_CASE("sim-LN is scale invariant above the floor") {
    ArchSpec spec{ArchKind::SimLN, 2, 6, 4, Activation::Relu, 1e-4};
    const ModelParams p = init_params(spec, InitScale::He, 13);
    ModelParams q = p;
    for (auto& v : q.W[0]) v *= 5.0;
    for (auto& v : q.b1) v *= 5.0;
    Rng rng = make_rng(6);
    for (int t = 0; t < 20; ++t) {
        Vec x(4);
        for (auto& v : x) v = gaussian(rng);
        double norm2 = 0;
        for (int j = 0; j < 6; ++j) {
            double z = p.b1[j];
            for (int c = 0; c < 4; ++c) z += p.W[0][static_cast<std::size_t>(j) * 4 + c] * x[c];
            if (z > 0) norm2 += z * z;
        }
        if (std::sqrt(norm2) <= spec.ln_epsilon) continue;
        CHECK(forward(spec, q, x) == doctest::Approx(forward(spec, p, x)).epsilon(1e-12));
    }
}

TEST_CASE("shape and context errors") {
    ArchSpec spec{ArchKind::SimBN, 2, 3, 4, Activation::Relu, 0.0};
    const ModelParams p = init_params(spec, InitScale::He, 1);
    const Vec x{1, 2, 3, 4};
    CHECK_THROWS(forward(spec, p, x)); // missing batch context
    ArchSpec nb{ArchKind::NoBias, 2, 3, 4, Activation::Relu, 0.0};
    const ModelParams q = init_params(nb, InitScale::He, 1);
    const Vec bad{1, 2};
    CHECK_THROWS(forward(nb, q, bad));
    ArchSpec deep_ln{ArchKind::SimLN, 3, 3, 4, Activation::Relu, 0.1};
    CHECK_THROWS(deep_ln.validate());
}
