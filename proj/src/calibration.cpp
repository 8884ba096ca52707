#include "tgq/calibration.hpp"

#include <fstream>

#include "json.hpp"

#include "tgq/errors.hpp"
#include "tgq/numfmt.hpp"

namespace tgq {

double per_tensor_radius(const Tensor& x, const QuantConfig& cfg) {
    if (x.dtype() != DType::f32 || x.size() == 0)
        throw ShapeError("per_tensor_radius: expected a non-empty tensor of reals");
    if (!x.all_finite())
        throw NonFiniteInput("per_tensor_radius: input contains NaN or Inf");
    auto v = x.f32();
    std::vector<double> all(v.begin(), v.end());
    const double c_base = base_radius(all, cfg.percentile);
    return project_group_radius(c_base, all, cfg).c_final;
}

RadiusTable calibrate_fixed_radii(const std::string& layer_name,
                                  const std::vector<Tensor>& samples,
                                  const std::vector<std::string>& sample_ids,
                                  const QuantConfig& cfg) {
    cfg.validate();
    if (samples.empty())
        throw EmptyCalibration("calibrate_fixed_radii: no calibration samples");
    if (!sample_ids.empty() && sample_ids.size() != samples.size())
        throw ShapeError("calibrate_fixed_radii: sample id count does not match sample count");

    RadiusTable table;
    table.cfg = cfg;
    double radius = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        radius = std::max(radius, per_tensor_radius(samples[i], cfg));
        table.sources.push_back(sample_ids.empty() ? "sample" + std::to_string(i) : sample_ids[i]);
    }
    table.radii[layer_name] = radius;
    return table;
}

std::string radius_table_to_json(const RadiusTable& table) {
    nlohmann::json j;
    for (const auto& [name, r] : table.radii) j[name] = round_g9(r);
    return j.dump(2) + "\n";
}

void write_radius_table(const RadiusTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("write_radius_table: cannot open '" + path.string() + "'");
    out << radius_table_to_json(table);
    if (!out)
        throw IoError("write_radius_table: write to '" + path.string() + "' failed");
}

std::map<std::string, double> read_radius_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("read_radius_table: cannot open '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("read_radius_table: '" + path.string() + "': " + e.what());
    }
    if (!j.is_object())
        throw ParseError("read_radius_table: '" + path.string() + "': expected a JSON object");
    std::map<std::string, double> radii;
    for (const auto& [name, v] : j.items()) {
        if (!v.is_number())
            throw ParseError("read_radius_table: '" + path.string() + "': radius for '" + name +
                             "' is not a number");
        radii[name] = v.get<double>();
    }
    return radii;
}

FrozenRadii frozen_from_table(const std::map<std::string, double>& radii,
                              const std::string& layer_name, const QuantConfig& cfg) {
    auto it = radii.find(layer_name);
    if (it == radii.end())
        throw ConfigError("frozen_from_table: no radius for layer '" + layer_name + "'");
    if (!(it->second > 0.0))
        throw InvalidRadius("frozen_from_table: radius for layer '" + layer_name + "' must be > 0");
    FrozenRadii f;
    f.mode = QuantMode::per_tensor;
    f.group_size = cfg.group_size;
    f.radius = {it->second};
    return f;
}

} // namespace tgq
