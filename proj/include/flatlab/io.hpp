#pragma once

#include <map>
#include <string>
#include <utility>

#include "flatlab/dataset.hpp"
#include "flatlab/model.hpp"

namespace flatlab {

/// "%.17g" formatting, enough to round-trip a double exactly.
std::string fmt17(double v);

/// CSV with header x1,...,xd,y, one row per example, full double precision.
void save_dataset_csv(const LabeledDataset& data, const std::string& path);
LabeledDataset load_dataset_csv(const std::string& path);

/// Text checkpoint: header line `arch=<kind> depth=<D> m=<m> d=<d> act=<act>
/// ln_eps=<v>`, then one flattened parameter per line in canonical order.
void save_checkpoint(const ArchSpec& spec, const ModelParams& p, const std::string& path);
std::pair<ArchSpec, ModelParams> load_checkpoint(const std::string& path);

/// Flat `key=value` config files; '#' starts a comment line.
std::map<std::string, std::string> load_config(const std::string& path);
void save_config(const std::map<std::string, std::string>& kv, const std::string& path);

} // namespace flatlab
