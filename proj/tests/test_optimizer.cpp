#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flatlab/constructions.hpp"
#include "flatlab/optimizer.hpp"
#include "flatlab/rng.hpp"
#include "flatlab/sharpness.hpp"

using namespace flatlab;

namespace {

double l2_diff(const Vec& a, const Vec& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

} // namespace

TEST_CASE("full-batch step equals theta - lr*(grad + wd*theta)") {
    ArchSpec spec{ArchKind::Bias, 2, 8, 5, Activation::Relu, 0.0};
    const auto data = sample_xor(5, 12, 1);
    const ModelParams p0 = init_params(spec, InitScale::He, 2);
    TrainConfig cfg;
    cfg.lr = 0.03;
    cfg.weight_decay = 0.01;
    cfg.batch_size = static_cast<int>(data.size());
    const ModelParams p1 = gd_wd_epoch(spec, p0, data, cfg);

    // independent route: the mean-loss gradient from the sharpness module
    Vec g;
    make_grad_closure(spec, data, LossKind::mse())(flatten(spec, p0), g);
    const Vec t0 = flatten(spec, p0), t1 = flatten(spec, p1);
    for (std::size_t k = 0; k < t0.size(); ++k)
        CHECK(t1[k] == doctest::Approx(t0[k] - cfg.lr * (g[k] + cfg.weight_decay * t0[k]))
                           .epsilon(1e-12));
    CHECK_THROWS(gd_wd_epoch(spec, p0, data, TrainConfig{.batch_size = 1}));
}

TEST_CASE("zero training gradient leaves pure weight decay") {
    ArchSpec spec{ArchKind::NoBias, 2, 4, 3, Activation::Relu, 0.0};
    ModelParams p = init_params(spec, InitScale::He, 3);
    for (auto& v : p.W[1]) v = 0.0; // zero outputs and zero labels: grad = 0
    LabeledDataset data = sample_xor(3, 6, 4);
    for (auto& y : data.labels) y = 0.0;
    TrainConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.5;
    cfg.batch_size = 6;
    const Vec w0 = p.W[0];
    ModelParams cur = p;
    for (int t = 1; t <= 3; ++t) {
        cur = gd_wd_epoch(spec, cur, data, cfg);
        const double decay = std::pow(1.0 - cfg.lr * cfg.weight_decay, t);
        for (std::size_t k = 0; k < w0.size(); ++k)
            CHECK(cur.W[0][k] == doctest::Approx(w0[k] * decay).epsilon(1e-12));
    }
}

TEST_CASE("sam epoch reduces to sgd as rho vanishes") {
    ArchSpec spec{ArchKind::Bias, 2, 6, 4, Activation::Relu, 0.0};
    const auto data = sample_xor(4, 10, 5);
    const ModelParams p0 = init_params(spec, InitScale::He, 6);
    TrainConfig base;
    base.lr = 0.02;
    base.batch_size = 1;
    base.seed = 77;

    TrainConfig sgd = base; // rho = 0
    const Vec t_sgd = flatten(spec, one_sam_epoch(spec, p0, data, sgd, 1));
    double prev_ratio = -1;
    for (double rho : {1e-4, 1e-5}) {
        TrainConfig sam = base;
        sam.sam_rho = rho;
        const Vec t_sam = flatten(spec, one_sam_epoch(spec, p0, data, sam, 1));
        const double ratio = l2_diff(t_sam, t_sgd) / rho; // K in ||diff|| <= K*rho
        CHECK(ratio < 100.0);
        if (prev_ratio > 0) CHECK(ratio == doctest::Approx(prev_ratio).epsilon(0.15));
        prev_ratio = ratio;
    }
}

TEST_CASE("sam epoch is a no-op at an exact global minimizer") {
    const int d = 6;
    const auto cube = enumerate_hypercube(d);
    ArchSpec spec{ArchKind::Bias, 2, 4, d, Activation::Relu, 0.0};
    const ModelParams p = good_xor_bias(d);
    TrainConfig cfg;
    cfg.lr = 0.05;
    cfg.sam_rho = 0.1;
    cfg.batch_size = 1;
    const ModelParams q = one_sam_epoch(spec, p, cube, cfg, 3);
    CHECK(flatten(spec, q) == flatten(spec, p));
}

TEST_CASE("equal seeds give bit-identical trajectories") {
    ArchSpec spec{ArchKind::NoBias, 2, 8, 6, Activation::Relu, 0.0};
    const auto train_set = sample_xor(6, 16, 7);
    const auto test_set = enumerate_hypercube(6);
    TrainConfig cfg;
    cfg.lr = 0.02;
    cfg.sam_rho = 0.05;
    cfg.batch_size = 1;
    cfg.epochs = 12;
    cfg.log_every = 3;
    cfg.seed = 99;
    const ModelParams init = init_params(spec, InitScale::He, 8);
    const TrainResult a = train(spec, init, train_set, test_set, cfg);
    const TrainResult b = train(spec, init, train_set, test_set, cfg);
    REQUIRE(a.log.rows.size() == b.log.rows.size());
    for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
        CHECK(a.log.rows[i].train_loss == b.log.rows[i].train_loss);
        CHECK(a.log.rows[i].hutchinson_trace == b.log.rows[i].hutchinson_trace);
        CHECK(a.log.rows[i].path_norm == b.log.rows[i].path_norm);
    }
    CHECK(flatten(spec, a.params) == flatten(spec, b.params));

    TrainConfig other = cfg;
    other.seed = 100; // different shuffles
    const TrainResult c = train(spec, init, train_set, test_set, other);
    CHECK(flatten(spec, c.params) != flatten(spec, a.params));
}

TEST_CASE("projection caps both first-layer norms independently") {
    ArchSpec spec{ArchKind::SimLN, 2, 10, 5, Activation::Relu, 0.01};
    ModelParams p = init_params(spec, InitScale::He, 9);
    for (auto& v : p.W[0]) v *= 40.0;
    for (auto& v : p.b1) v *= 40.0;
    const double R = 3.0;
    const ModelParams q = project_first_layer(spec, p, R);
    double w2 = 0, b2 = 0;
    for (double v : q.W[0]) w2 += v * v;
    for (double v : q.b1) b2 += v * v;
    CHECK(std::sqrt(w2) == doctest::Approx(R).epsilon(1e-12));
    CHECK(std::sqrt(b2) == doctest::Approx(R).epsilon(1e-12));

    // idempotent, and identity inside the ball
    const ModelParams qq = project_first_layer(spec, q, R);
    CHECK(flatten(spec, qq) == flatten(spec, q));

    // the constraint holds after every training epoch
    const auto train_set = sample_xor(5, 12, 10);
    TrainConfig cfg;
    cfg.lr = 0.5;
    cfg.sam_rho = 0.1;
    cfg.batch_size = 1;
    cfg.projection_radius = R;
    cfg.seed = 3;
    ModelParams cur = p;
    for (long epoch = 1; epoch <= 10; ++epoch) {
        cur = one_sam_epoch(spec, cur, train_set, cfg, epoch);
        double cw = 0, cb = 0;
        for (double v : cur.W[0]) cw += v * v;
        for (double v : cur.b1) cb += v * v;
        CHECK(std::sqrt(cw) <= R + 1e-9);
        CHECK(std::sqrt(cb) <= R + 1e-9);
    }
}

TEST_CASE("zero epochs returns the initialization with a single log row") {
    ArchSpec spec{ArchKind::Bias, 2, 6, 4, Activation::Relu, 0.0};
    const auto train_set = sample_xor(4, 8, 11);
    const ModelParams init = init_params(spec, InitScale::He, 12);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.batch_size = 8;
    const TrainResult r = train(spec, init, train_set, train_set, cfg);
    CHECK(r.log.rows.size() == 1);
    CHECK(r.log.rows[0].epoch == 0);
    CHECK(flatten(spec, r.params) == flatten(spec, init));
}

TEST_CASE("divergence aborts and preserves the partial log") {
    ArchSpec spec{ArchKind::Bias, 2, 8, 4, Activation::Relu, 0.0};
    const auto train_set = sample_xor(4, 8, 13);
    TrainConfig cfg;
    cfg.lr = 1e12; // blow up immediately
    cfg.batch_size = 8;
    cfg.epochs = 50;
    cfg.log_every = 1;
    const TrainResult r = train(spec, init_params(spec, InitScale::He, 14), train_set, train_set, cfg);
    CHECK(r.log.diverged);
    CHECK(r.log.diverged_epoch >= 1);
    CHECK(r.log.rows.size() >= 1);
}

TEST_CASE("small-rate descent: training loss is non-increasing after warmup") {
    ArchSpec spec{ArchKind::NoBias, 2, 24, 5, Activation::Relu, 0.0};
    const auto train_set = sample_xor(5, 20, 15);
    TrainConfig cfg;
    cfg.lr = 0.005;
    cfg.weight_decay = 0.001;
    cfg.batch_size = 20;
    cfg.epochs = 300;
    cfg.log_every = 1;
    cfg.hutchinson_probes = 8;
    const TrainResult r = train(spec, init_params(spec, InitScale::He, 16), train_set, train_set, cfg);
    REQUIRE(!r.log.diverged);
    for (std::size_t i = 101; i < r.log.rows.size(); ++i)
        CHECK(r.log.rows[i].train_loss <= r.log.rows[i - 1].train_loss + 1e-6);
    CHECK(r.log.rows.back().train_loss < r.log.rows[0].train_loss);
}

TEST_CASE("minibatch sgd pass consumes every example deterministically") {
    ArchSpec spec{ArchKind::NoBias, 2, 6, 4, Activation::Relu, 0.0};
    const auto train_set = sample_xor(4, 10, 17);
    TrainConfig cfg;
    cfg.lr = 0.01;
    cfg.batch_size = 3; // ragged final batch of size 1
    cfg.epochs = 5;
    cfg.seed = 5;
    const ModelParams init = init_params(spec, InitScale::He, 18);
    const TrainResult a = train(spec, init, train_set, train_set, cfg);
    const TrainResult b = train(spec, init, train_set, train_set, cfg);
    CHECK(flatten(spec, a.params) == flatten(spec, b.params));
    CHECK(!a.log.diverged);

    TrainConfig bad = cfg;
    bad.sam_rho = 0.1; // rho > 0 requires batch 1
    CHECK_THROWS(train(spec, init, train_set, train_set, bad));
}

TEST_CASE("trajectory csv round trip") {
    TrajectoryLog log;
    log.rows.push_back({0, 1.5, 2.5, 0.5, 3.25, 1.125, 0.75});
    log.rows.push_back({10, 0.25, 1.0, 0.25, 2.0, 1.0, 0.5});
    save_trajectory_csv(log, "test_traj.csv");
    const TrajectoryLog loaded = load_trajectory_csv("test_traj.csv");
    REQUIRE(loaded.rows.size() == 2);
    CHECK(loaded.rows[1].epoch == 10);
    CHECK(loaded.rows[0].hutchinson_trace == 3.25);
    CHECK(loaded.rows[1].path_norm == 0.5);
    std::remove("test_traj.csv");
}
