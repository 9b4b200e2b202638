#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flatlab/constructions.hpp"
#include "flatlab/optimizer.hpp"
#include "flatlab/presets.hpp"

namespace flatlab {

/// Output root: $FLATLAB_OUT when set, otherwise ./runs.
std::string output_root();

/// Training and test sets a preset binds to (xor or ball, d and n per preset).
LabeledDataset preset_train_set(const ExperimentPreset& p, std::uint64_t seed);
LabeledDataset preset_test_set(const ExperimentPreset& p, std::uint64_t seed);

struct StagedResult {
    ArchSpec spec;
    ModelParams params;
    TrajectoryLog log; // cumulative epochs across stages
};

/// Runs every stage of a preset sequentially (each inherits the previous
/// stage's parameters), epochs scaled by `scale`; no files are written.
StagedResult run_stages(const ExperimentPreset& preset, double scale, std::uint64_t seed,
                        const LabeledDataset& train_set, const LabeledDataset& test_set);

struct RunResult {
    std::string dir;
    ArchSpec spec;
    ModelParams params;
    TrajectoryLog log;
};

/// Executes a preset (all stages) at the given epoch scale and writes the run
/// directory: config snapshot, dataset CSVs, trajectory CSV, final checkpoint,
/// certificates where a construction is involved, and SVG plots.
RunResult run_preset(const std::string& preset_id, double scale, std::uint64_t seed);

struct VerifyRow {
    std::string name;
    ConstructionCertificate cert;
    double fd_trace = 0.0;
    bool pass = false;
    std::string note;
};

struct VerifyReport {
    std::vector<VerifyRow> rows;
    bool all_pass = true;
    std::string table() const;
    std::string csv() const;
};

/// Certificates for every closed-form construction on small instances.
/// A row passes when the interpolation residual stays below 1e-8 and the
/// relative gap below 1e-4 (the sim-BN row instead checks its scale sweep:
/// trace decreasing in s with the final value within 1% of 4).
VerifyReport verify_all(int d_small = 10, std::size_t n_small = 40, std::uint64_t seed = 0);

/// Independent runs over seeds, in parallel worker threads; returns run dirs.
std::vector<std::string> sweep(const std::string& preset_id, double scale,
                               const std::vector<std::uint64_t>& seeds, int threads);

} // namespace flatlab
