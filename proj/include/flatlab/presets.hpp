#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flatlab/loss.hpp"
#include "flatlab/model.hpp"
#include "flatlab/optimizer.hpp"

namespace flatlab {

enum class DataKind { Xor, Ball };

struct PresetStage {
    double lr = 0.0;
    double rho = 0.0;
    int batch = 1;
    double weight_decay = 0.0;
    long epochs = 0;
};

/// One experiment preset: architecture, data, loss and the staged
/// hyperparameter rows it trains with. Stages run sequentially, each
/// inheriting the previous stage's parameters.
struct ExperimentPreset {
    std::string id;
    ArchKind arch = ArchKind::NoBias;
    int depth = 2;
    Activation act = Activation::Relu;
    DataKind data = DataKind::Xor;
    LossKind loss = LossKind::mse();
    InitScale init = InitScale::He;
    double ln_eps = 0.01;
    std::optional<double> projection_radius;
    std::vector<PresetStage> stages; // empty for the construction gallery
    bool construction_gallery = false;

    int data_dim() const { return data == DataKind::Ball ? 10 : 30; }
    std::size_t train_n() const { return 100; }
    int width(double scale) const { return scale >= 1.0 ? 500 : 100; }
};

const std::vector<ExperimentPreset>& all_presets();
const ExperimentPreset& find_preset(const std::string& id); // throws on unknown preset
std::string preset_table(); // human-readable listing

} // namespace flatlab
