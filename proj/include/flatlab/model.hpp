#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flatlab/dataset.hpp"

namespace flatlab {

using Vec = std::vector<double>;

enum class ArchKind { NoBias, Bias, SimBN, SimLN };
enum class Activation { Relu, Softplus };

std::string to_string(ArchKind k);
std::string to_string(Activation a);
ArchKind arch_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);

struct ArchSpec {
    ArchKind kind = ArchKind::NoBias;
    int depth = 2; // D > 2 only for Bias
    int width = 1; // m
    int input_dim = 2;
    Activation act = Activation::Relu;
    double ln_epsilon = 0.0; // SimLN only, > 0

    void validate() const;
    bool has_bias() const { return kind != ArchKind::NoBias; }
    std::size_t param_count() const;
};

/// Parameter bundle. Canonical flattening order: W1 row-major, then b1,
/// then gamma, then W2 ... WD row-major.
struct ModelParams {
    // W[0]: m x d; W[1..D-2]: m x m; W[D-1]: 1 x m. All row-major.
    std::vector<Vec> W;
    Vec b1;    // length m (absent for NoBias)
    Vec gamma; // length m (SimBN only)
};

ModelParams zero_params(const ArchSpec& spec);
Vec flatten(const ArchSpec& spec, const ModelParams& p);
ModelParams unflatten(const ArchSpec& spec, const Vec& theta);
/// Copies theta into an already-shaped ModelParams without reallocating.
void unflatten_into(const ArchSpec& spec, const Vec& theta, ModelParams& p);

/// Per-channel RMS denominators of the simplified BatchNorm over a reference
/// dataset, plus their derivatives w.r.t. the first layer (one row per channel,
/// columns = d weights then the bias entry). Recompute whenever W1/b1 change.
struct BatchContext {
    Vec a;        // m
    Vec da;       // m x (d+1), row-major; d(a[j])/d(W1[j,c]), last column b1[j]
    bool stop_grad = false; // ignore the batch-statistic path in gradients
};

BatchContext refresh_batch_context(const ArchSpec& spec, const ModelParams& p,
                                   const LabeledDataset& data);

double forward(const ArchSpec& spec, const ModelParams& p, std::span<const double> x,
               const BatchContext* ctx = nullptr);

/// Exact gradient of the scalar output w.r.t. all parameters, in canonical
/// flat order. relu'(0) = 0. SimBN gradients flow through the batch statistic
/// unless ctx->stop_grad is set; SimLN takes the norm branch when ||h|| > eps.
void per_example_grad(const ArchSpec& spec, const ModelParams& p, std::span<const double> x,
                      const BatchContext* ctx, Vec& grad_out);
Vec per_example_grad(const ArchSpec& spec, const ModelParams& p, std::span<const double> x,
                     const BatchContext* ctx = nullptr);

enum class InitScale { He, SimlnDownscale, UniformFanin };

/// He: Gaussian entries with std sqrt(2/fan_in) per layer; SimlnDownscale
/// additionally divides W1 and b1 by 100. UniformFanin: U(-1/sqrt(fan_in),
/// 1/sqrt(fan_in)) per layer, the scale the training presets use (He-sized
/// first-layer activations put batch-1 updates past the stability threshold
/// at the preset learning rates). gamma starts at 1 in every mode.
ModelParams init_params(const ArchSpec& spec, InitScale mode, std::uint64_t seed);

} // namespace flatlab
