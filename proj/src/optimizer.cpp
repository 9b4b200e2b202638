#include "flatlab/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "flatlab/analysis.hpp"
#include "flatlab/rng.hpp"
#include "flatlab/sharpness.hpp"

namespace flatlab {

void TrainConfig::validate(std::size_t n) const {
    if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (weight_decay < 0.0 || sam_rho < 0.0) throw std::invalid_argument("TrainConfig: negative hyperparameter");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (sam_rho > 0.0 && batch_size != 1)
        throw std::invalid_argument("TrainConfig: rho > 0 requires batch_size = 1 (1-SAM)");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: negative epochs");
    if (log_every < 1) throw std::invalid_argument("TrainConfig: log_every must be >= 1");
    (void)n;
}

void save_trajectory_csv(const TrajectoryLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "epoch,train_loss,test_loss,zero_one_error,hutchinson_trace,jac_surrogate,path_norm\n";
    out.precision(17);
    for (const auto& r : log.rows)
        out << r.epoch << "," << r.train_loss << "," << r.test_loss << "," << r.zero_one_error
            << "," << r.hutchinson_trace << "," << r.jac_surrogate << "," << r.path_norm << "\n";
}

TrajectoryLog load_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    TrajectoryLog log;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        TrajectoryRow r;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ','); r.epoch = std::stol(cell);
        std::getline(ss, cell, ','); r.train_loss = std::stod(cell);
        std::getline(ss, cell, ','); r.test_loss = std::stod(cell);
        std::getline(ss, cell, ','); r.zero_one_error = std::stod(cell);
        std::getline(ss, cell, ','); r.hutchinson_trace = std::stod(cell);
        std::getline(ss, cell, ','); r.jac_surrogate = std::stod(cell);
        std::getline(ss, cell, ','); r.path_norm = std::stod(cell);
        log.rows.push_back(r);
    }
    return log;
}

namespace {

struct Trainer {
    const ArchSpec& spec;
    const LabeledDataset& data;
    const TrainConfig& cfg;
    Vec theta;
    ModelParams params;
    Vec targets;
    Vec saved_buf;
    BatchContext ctx;
    std::size_t w1_count, b1_count;

    Trainer(const ArchSpec& s, ModelParams initial, const LabeledDataset& d, const TrainConfig& c)
        : spec(s), data(d), cfg(c), params(std::move(initial)) {
        theta = flatten(spec, params);
        targets = loss_labels(data, cfg.loss);
        w1_count = static_cast<std::size_t>(spec.width) * spec.input_dim;
        b1_count = spec.has_bias() ? static_cast<std::size_t>(spec.width) : 0;
        ctx.stop_grad = cfg.sbn_stop_grad;
    }

    void sync_params() { unflatten_into(spec, theta, params); }

    void refresh_ctx() {
        if (spec.kind == ArchKind::SimBN) {
            const bool stop = ctx.stop_grad;
            ctx = refresh_batch_context(spec, params, data);
            ctx.stop_grad = stop;
        }
    }

    const BatchContext* ctx_ptr() const { return spec.kind == ArchKind::SimBN ? &ctx : nullptr; }

    // gradient of the per-example loss at the current params, into g
    void example_loss_grad(std::size_t i, Vec& g) {
        const double f = forward(spec, params, data.row(i), ctx_ptr());
        const double dl = loss_derivatives(cfg.loss, f, targets[i]).first;
        per_example_grad(spec, params, data.row(i), ctx_ptr(), g);
        for (double& v : g) v *= dl;
    }

    void check_finite(const Vec& g, long epoch) const {
        for (double v : g)
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << "divergence: non-finite gradient at epoch " << epoch;
                throw std::runtime_error(os.str());
            }
    }

    void apply_step(const Vec& g) {
        const double lr = cfg.lr, wd = cfg.weight_decay;
        for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= lr * (g[k] + wd * theta[k]);
        if (cfg.projection_radius) project_flat(*cfg.projection_radius);
        sync_params();
    }

    void project_flat(double R) {
        // slack keeps the projection idempotent under rounding
        const double cap = R * R * (1.0 + 1e-12);
        double w2 = 0.0;
        for (std::size_t k = 0; k < w1_count; ++k) w2 += theta[k] * theta[k];
        if (w2 > cap) {
            const double f = R / std::sqrt(w2);
            for (std::size_t k = 0; k < w1_count; ++k) theta[k] *= f;
        }
        double b2 = 0.0;
        for (std::size_t k = w1_count; k < w1_count + b1_count; ++k) b2 += theta[k] * theta[k];
        if (b2 > cap) {
            const double f = R / std::sqrt(b2);
            for (std::size_t k = w1_count; k < w1_count + b1_count; ++k) theta[k] *= f;
        }
    }

    void full_batch_epoch(long epoch) {
        refresh_ctx();
        Vec g(theta.size(), 0.0);
        Vec gi;
        const double inv_n = 1.0 / static_cast<double>(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            example_loss_grad(i, gi);
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += inv_n * gi[k];
        }
        check_finite(g, epoch);
        apply_step(g);
    }

    void stochastic_epoch(long epoch) {
        std::vector<std::size_t> order(data.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = make_rng(derive_seed(cfg.seed, 0x51, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);

        Vec g, g2;
        const int b = cfg.batch_size;
        for (std::size_t pos = 0; pos < order.size();) {
            if (cfg.sam_rho > 0.0) {
                const std::size_t i = order[pos++];
                refresh_ctx();
                example_loss_grad(i, g);
                check_finite(g, epoch);
                double gn = 0.0;
                for (double v : g) gn += v * v;
                gn = std::sqrt(gn);
                if (gn > 0.0) {
                    saved_buf = theta;
                    for (std::size_t k = 0; k < theta.size(); ++k)
                        theta[k] += cfg.sam_rho * g[k] / gn;
                    sync_params();
                    refresh_ctx();
                    example_loss_grad(i, g2);
                    check_finite(g2, epoch);
                    theta.swap(saved_buf);
                    apply_step(g2);
                } else {
                    apply_step(g);
                }
            } else {
                // plain (mini-batch) SGD pass
                refresh_ctx();
                g.assign(theta.size(), 0.0);
                Vec gi;
                int count = 0;
                while (count < b && pos < order.size()) {
                    example_loss_grad(order[pos++], gi);
                    for (std::size_t k = 0; k < g.size(); ++k) g[k] += gi[k];
                    ++count;
                }
                for (double& v : g) v /= count;
                check_finite(g, epoch);
                apply_step(g);
            }
        }
    }

    void run_epoch(long epoch) {
        if (static_cast<std::size_t>(cfg.batch_size) >= data.size()) full_batch_epoch(epoch);
        else stochastic_epoch(epoch);
    }
};

} // namespace

ModelParams gd_wd_epoch(const ArchSpec& spec, const ModelParams& p, const LabeledDataset& data,
                        const TrainConfig& cfg, long epoch) {
    if (static_cast<std::size_t>(cfg.batch_size) < data.size())
        throw std::invalid_argument("gd_wd_epoch: requires full batch (batch_size = n)");
    Trainer t(spec, p, data, cfg);
    t.full_batch_epoch(epoch);
    return std::move(t.params);
}

ModelParams one_sam_epoch(const ArchSpec& spec, const ModelParams& p, const LabeledDataset& data,
                          const TrainConfig& cfg, long epoch) {
    if (cfg.batch_size != 1) throw std::invalid_argument("one_sam_epoch: batch_size must be 1");
    Trainer t(spec, p, data, cfg);
    t.stochastic_epoch(epoch);
    return std::move(t.params);
}

ModelParams project_first_layer(const ArchSpec& spec, const ModelParams& p, double R) {
    if (R <= 0.0) throw std::invalid_argument("project_first_layer: R must be positive");
    ModelParams out = p;
    const double cap = R * R * (1.0 + 1e-12); // idempotent under rounding
    double w2 = 0.0;
    for (double v : out.W[0]) w2 += v * v;
    if (w2 > cap) {
        const double f = R / std::sqrt(w2);
        for (double& v : out.W[0]) v *= f;
    }
    double b2 = 0.0;
    for (double v : out.b1) b2 += v * v;
    if (b2 > cap) {
        const double f = R / std::sqrt(b2);
        for (double& v : out.b1) v *= f;
    }
    (void)spec;
    return out;
}

namespace {

TrajectoryRow make_log_row(const ArchSpec& spec, Trainer& t, const LabeledDataset& test_set,
                           long epoch) {
    TrajectoryRow row;
    row.epoch = epoch;
    t.refresh_ctx();
    const auto* ctx = t.ctx_ptr();
    const Vec test_targets = loss_labels(test_set, t.cfg.loss);

    double train_loss = 0.0;
    for (std::size_t i = 0; i < t.data.size(); ++i)
        train_loss += loss_value(t.cfg.loss, forward(spec, t.params, t.data.row(i), ctx), t.targets[i]);
    row.train_loss = train_loss / static_cast<double>(t.data.size());

    double test_loss = 0.0;
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
        const double f = forward(spec, t.params, test_set.row(i), ctx);
        test_loss += loss_value(t.cfg.loss, f, test_targets[i]);
        if (test_set.labels[i] * f <= 0.0) ++wrong;
    }
    row.test_loss = test_loss / static_cast<double>(test_set.size());
    row.zero_one_error = static_cast<double>(wrong) / static_cast<double>(test_set.size());

    row.jac_surrogate = jac_surrogate(spec, t.params, t.data);
    row.path_norm = spec.depth == 2 ? path_norm(spec, t.params) : 0.0;
    const auto est = hutchinson_trace(make_grad_closure(spec, t.data, t.cfg.loss), t.theta,
                                      t.cfg.hutchinson_probes, 1e-3,
                                      derive_seed(t.cfg.seed, 0x52, static_cast<std::uint64_t>(epoch)));
    row.hutchinson_trace = est.estimate;
    return row;
}

} // namespace

TrainResult train(const ArchSpec& spec, ModelParams initial, const LabeledDataset& train_set,
                  const LabeledDataset& test_set, const TrainConfig& cfg) {
    spec.validate();
    cfg.validate(train_set.size());
    TrainResult result;
    Trainer t(spec, std::move(initial), train_set, cfg);
    result.log.rows.push_back(make_log_row(spec, t, test_set, 0));
    for (long epoch = 1; epoch <= cfg.epochs; ++epoch) {
        try {
            t.run_epoch(epoch);
        } catch (const std::runtime_error&) {
            result.log.diverged = true;
            result.log.diverged_epoch = epoch;
            break;
        }
        if (epoch % cfg.log_every == 0 || epoch == cfg.epochs)
            result.log.rows.push_back(make_log_row(spec, t, test_set, epoch));
    }
    result.params = std::move(t.params);
    return result;
}

} // namespace flatlab
