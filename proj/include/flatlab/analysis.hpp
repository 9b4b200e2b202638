#pragma once

#include <string>
#include <vector>

#include "flatlab/dataset.hpp"
#include "flatlab/loss.hpp"
#include "flatlab/model.hpp"

namespace flatlab {

/// Fraction of test points with y * f(x) <= 0 (ties count as errors, so an
/// identically-zero memorizer scores 1).
double zero_one_error(const ArchSpec& spec, const ModelParams& p, const LabeledDataset& test,
                      const BatchContext* ctx = nullptr);

/// Mean of (f(x) - y)^2 over the test set.
double mse_test_loss(const ArchSpec& spec, const ModelParams& p, const LabeledDataset& test,
                     const BatchContext* ctx = nullptr);

struct NeuronRow {
    int index = 0;
    double w1 = 0.0;        // W1_i[1]
    double w2 = 0.0;        // W1_i[2]
    double tail_norm = 0.0; // ||W1_i[3:d]||
    double row_norm = 0.0;  // ||W1_i||
    double out_weight = 0.0; // |W2[i]|
};

struct NeuronReport {
    std::vector<NeuronRow> rows;  // sorted by row_norm, descending, stable
    double col1_norm = 0.0;       // ||W1[:,1]||
    double col2_norm = 0.0;       // ||W1[:,2]||
    double max_rest_col_norm = 0.0;
};

NeuronReport neuron_report(const ArchSpec& spec, const ModelParams& p, int top_k);
std::string neuron_report_csv(const NeuronReport& r);
std::string neuron_report_text(const NeuronReport& r);

/// Weight-norm-weighted fraction of neurons with ||W1_i[3:d]|| <= eps*||W1_i||.
double feature_alignment(const ArchSpec& spec, const ModelParams& p, double eps);

} // namespace flatlab
