#include "flatlab/presets.hpp"

#include <sstream>
#include <stdexcept>

namespace flatlab {

namespace {

std::vector<ExperimentPreset> build_presets() {
    const LossKind mse = LossKind::mse();
    const LossKind logi = LossKind::logistic(0.2);
    std::vector<ExperimentPreset> v;
    auto add = [&](ExperimentPreset p) { v.push_back(std::move(p)); };

    add({"fig1a", ArchKind::NoBias, 2, Activation::Relu, DataKind::Xor, mse, InitScale::UniformFanin, 0.01,
         {}, {{0.01, 0.0, 100, 0.05, 100000}}, false});
    add({"fig1b", ArchKind::NoBias, 2, Activation::Relu, DataKind::Xor, mse, InitScale::UniformFanin, 0.01,
         {}, {{0.01, 0.05, 1, 0.0, 100000}}, false});
    add({"fig2", ArchKind::SimBN, 2, Activation::Relu, DataKind::Xor, mse, InitScale::UniformFanin, 0.01,
         {}, {{0.005, 0.1, 1, 0.0, 100000}, {0.003, 1.0, 1, 0.0, 100000}}, false});
    add({"fig3a", ArchKind::Bias, 2, Activation::Relu, DataKind::Xor, mse, InitScale::UniformFanin, 0.01,
         {}, {{0.01, 0.0, 100, 0.05, 100000}}, false});
    add({"fig3b", ArchKind::Bias, 2, Activation::Relu, DataKind::Xor, mse, InitScale::UniformFanin, 0.01,
         {}, {{0.01, 0.05, 1, 0.0, 200000}, {0.01, 0.1, 1, 0.0, 400000}}, false});
    add({"fig4a", ArchKind::Bias, 2, Activation::Softplus, DataKind::Xor, mse, InitScale::UniformFanin, 0.01,
         {}, {{0.001, 0.0, 1, 0.05, 100000}}, false});
    add({"fig4b", ArchKind::Bias, 2, Activation::Softplus, DataKind::Xor, mse, InitScale::UniformFanin, 0.01,
         {}, {{0.0005, 0.05, 1, 0.0, 100000}, {0.001, 0.1, 1, 0.0, 100000}, {0.005, 1.0, 1, 0.0, 5000}},
         false});
    add({"fig5", ArchKind::Bias, 2, Activation::Relu, DataKind::Xor, mse, InitScale::He, 0.01,
         {}, {}, true}); // memorization gallery: constructions + certificates
    add({"fig6a", ArchKind::SimLN, 2, Activation::Relu, DataKind::Xor, mse, InitScale::SimlnDownscale,
         0.01, {}, {{0.1, 0.1, 1, 0.0, 100000}}, false});
    add({"fig6b", ArchKind::SimLN, 2, Activation::Relu, DataKind::Xor, mse, InitScale::SimlnDownscale,
         0.01, 10.0,
         {{0.01, 0.1, 1, 0.0, 500}, {0.01, 0.5, 1, 0.0, 500}, {0.01, 1.0, 1, 0.0, 500}}, false});
    add({"figB1", ArchKind::NoBias, 2, Activation::Relu, DataKind::Ball, mse, InitScale::UniformFanin, 0.01,
         {}, {{0.01, 0.2, 1, 0.0, 100000}}, false});
    add({"figB2", ArchKind::Bias, 2, Activation::Relu, DataKind::Ball, mse, InitScale::UniformFanin, 0.01,
         {}, {{0.01, 0.2, 1, 0.0, 100000}}, false});
    add({"figB3a", ArchKind::NoBias, 2, Activation::Relu, DataKind::Xor, logi, InitScale::UniformFanin, 0.01,
         {}, {{0.1, 0.0, 10, 0.01, 100000}}, false});
    add({"figB3b", ArchKind::NoBias, 2, Activation::Relu, DataKind::Xor, logi, InitScale::UniformFanin, 0.01,
         {}, {{0.1, 0.2, 1, 0.0, 100000}}, false});
    add({"figB4a", ArchKind::Bias, 2, Activation::Relu, DataKind::Xor, logi, InitScale::UniformFanin, 0.01,
         {}, {{0.01, 0.0, 1, 0.05, 100000}}, false});
    add({"figB4b", ArchKind::Bias, 2, Activation::Relu, DataKind::Xor, logi, InitScale::UniformFanin, 0.01,
         {}, {{0.1, 0.2, 1, 0.0, 100000}}, false});
    add({"figB5", ArchKind::SimBN, 2, Activation::Relu, DataKind::Xor, logi, InitScale::UniformFanin, 0.01,
         {}, {{0.1, 0.2, 1, 0.0, 40000}}, false});
    add({"figB6", ArchKind::SimLN, 2, Activation::Relu, DataKind::Xor, logi, InitScale::SimlnDownscale,
         0.01, {}, {{1.0, 0.5, 1, 0.0, 1000}, {1.0, 1.0, 1, 0.0, 100000}}, false});
    add({"figB7a", ArchKind::Bias, 3, Activation::Relu, DataKind::Xor, logi, InitScale::UniformFanin, 0.01,
         {}, {{0.01, 0.0, 1, 0.05, 100000}}, false});
    add({"figB7b", ArchKind::Bias, 3, Activation::Relu, DataKind::Xor, logi, InitScale::UniformFanin, 0.01,
         {}, {{0.01, 0.05, 1, 0.0, 100000}}, false});
    add({"tbl2", ArchKind::SimBN, 2, Activation::Relu, DataKind::Xor, mse, InitScale::UniformFanin, 0.01,
         {}, {{0.005, 0.1, 1, 0.0, 100000}, {0.003, 1.0, 1, 0.0, 100000}}, false});
    return v;
}

} // namespace

const std::vector<ExperimentPreset>& all_presets() {
    static const std::vector<ExperimentPreset> presets = build_presets();
    return presets;
}

const ExperimentPreset& find_preset(const std::string& id) {
    for (const auto& p : all_presets())
        if (p.id == id) return p;
    throw std::invalid_argument("unknown preset: " + id);
}

std::string preset_table() {
    std::ostringstream os;
    os << "id      arch    depth act      data  loss          stages (lr,rho,batch,wd,epochs)\n";
    for (const auto& p : all_presets()) {
        os << p.id;
        for (std::size_t k = p.id.size(); k < 8; ++k) os << ' ';
        os << to_string(p.arch) << "\t" << p.depth << "    " << to_string(p.act) << "\t "
           << (p.data == DataKind::Xor ? "xor " : "ball") << "  " << to_string(p.loss) << "\t";
        if (p.construction_gallery) os << "construction gallery";
        for (const auto& s : p.stages)
            os << " (" << s.lr << "," << s.rho << "," << s.batch << "," << s.weight_decay << ","
               << s.epochs << ")";
        if (p.init == InitScale::SimlnDownscale) os << " [init/100]";
        if (p.init == InitScale::UniformFanin) os << " [init uniform-fanin]";
        if (p.projection_radius) os << " [proj " << *p.projection_radius << "]";
        os << "\n";
    }
    return os.str();
}

} // namespace flatlab
