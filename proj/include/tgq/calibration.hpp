#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tgq/quant.hpp"
#include "tgq/tensor.hpp"

namespace tgq {

// Offline range calibration: one projected per-tensor radius per sample,
// aggregated by max, then frozen for inference.
struct RadiusTable {
    std::map<std::string, double> radii; // layer name -> radius
    QuantConfig cfg;                     // snapshot of the deriving config
    std::vector<std::string> sources;    // sample identifiers, in input order
};

// Derives the frozen radius for one layer from calibration samples. Every
// sample is reduced to a per-tensor radius (base rule, then the dual
// constraints over the whole tensor); the table keeps the max.
RadiusTable calibrate_fixed_radii(const std::string& layer_name,
                                  const std::vector<Tensor>& samples,
                                  const std::vector<std::string>& sample_ids,
                                  const QuantConfig& cfg);

// Projected per-tensor radius of one sample.
double per_tensor_radius(const Tensor& x, const QuantConfig& cfg);

// Flat JSON object {layer_name: radius}, 9 significant digits.
void write_radius_table(const RadiusTable& table, const std::filesystem::path& path);
std::string radius_table_to_json(const RadiusTable& table);
std::map<std::string, double> read_radius_table(const std::filesystem::path& path);

// Frozen per-tensor ranges for one layer out of a loaded table.
FrozenRadii frozen_from_table(const std::map<std::string, double>& radii,
                              const std::string& layer_name, const QuantConfig& cfg);

} // namespace tgq
