#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flatlab/dataset.hpp"
#include "flatlab/loss.hpp"
#include "flatlab/model.hpp"

namespace flatlab {

struct TrainConfig {
    double lr = 0.01;
    double weight_decay = 0.0;
    double sam_rho = 0.0;       // > 0 requires batch_size = 1 (1-SAM)
    int batch_size = 1;         // n for full-batch GD
    long epochs = 0;
    std::optional<double> projection_radius; // first-layer norm cap, applied after every step
    std::uint64_t seed = 0;
    long log_every = 100;
    LossKind loss = LossKind::mse();
    bool sbn_stop_grad = false; // treat SimBN batch statistics as constants in gradients
    int hutchinson_probes = 32;

    void validate(std::size_t n) const;
};

struct TrajectoryRow {
    long epoch = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double zero_one_error = 0.0;
    double hutchinson_trace = 0.0;
    double jac_surrogate = 0.0;
    double path_norm = 0.0;
};

struct TrajectoryLog {
    std::vector<TrajectoryRow> rows;
    bool diverged = false;
    long diverged_epoch = -1;
};

void save_trajectory_csv(const TrajectoryLog& log, const std::string& path);
TrajectoryLog load_trajectory_csv(const std::string& path);

/// One full-batch step: theta <- theta - lr * (grad L + wd * theta).
/// SimBN statistics are refreshed before the gradient. Throws on non-finite
/// gradients, carrying the epoch index.
ModelParams gd_wd_epoch(const ArchSpec& spec, const ModelParams& p, const LabeledDataset& data,
                        const TrainConfig& cfg, long epoch = 0);

/// One shuffled pass of batch-1 SAM: per example, ascend rho * g/||g|| then
/// descend at the perturbed point (plain step when ||g|| = 0). SimBN statistics
/// are functions of the current parameters, recomputed for both gradients.
ModelParams one_sam_epoch(const ArchSpec& spec, const ModelParams& p, const LabeledDataset& data,
                          const TrainConfig& cfg, long epoch);

/// Rescales W1 onto the Frobenius ball of radius R, and b1 onto the Euclidean
/// ball of radius R, each independently.
ModelParams project_first_layer(const ArchSpec& spec, const ModelParams& p, double R);

struct TrainResult {
    ModelParams params;
    TrajectoryLog log;
};

/// Runs cfg.epochs of the configured optimizer from the given initialization,
/// logging every log_every epochs (plus epochs 0 and the last). Divergence
/// aborts with the partial log preserved.
TrainResult train(const ArchSpec& spec, ModelParams initial, const LabeledDataset& train_set,
                  const LabeledDataset& test_set, const TrainConfig& cfg);

} // namespace flatlab
