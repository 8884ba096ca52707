#include "tgq/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "tgq/errors.hpp"
#include "tgq/numfmt.hpp"

namespace tgq {
namespace {

double population_std_f32(std::span<const float> v) {
    double sum = 0.0;
    for (float x : v) sum += static_cast<double>(x);
    const double mean = sum / static_cast<double>(v.size());
    double acc = 0.0;
    for (float x : v) {
        const double d = static_cast<double>(x) - mean;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(v.size()));
}

double lower_median(std::vector<double>& v) {
    const long k = quantile_rank(0.5, static_cast<long>(v.size()));
    std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
    return v[static_cast<std::size_t>(k - 1)];
}

std::vector<std::uint8_t> window_pass(std::span<const std::uint8_t> in, long h, long w,
                                      long radius, bool take_max, bool rows) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), 0);
    const long outer = rows ? h : w;
    const long inner = rows ? w : h;
    for (long a = 0; a < outer; ++a) {
        for (long b = 0; b < inner; ++b) {
            std::uint8_t acc = take_max ? 0 : 1;
            for (long d = -radius; d <= radius; ++d) {
                const long bb = b + d;
                std::uint8_t v = 0; // outside the grid counts as background
                if (bb >= 0 && bb < inner) {
                    const std::size_t at = rows ? static_cast<std::size_t>(a * w + bb)
                                                : static_cast<std::size_t>(bb * w + a);
                    v = in[at];
                }
                if (take_max)
                    acc = std::max(acc, v);
                else
                    acc = std::min(acc, v);
            }
            const std::size_t at = rows ? static_cast<std::size_t>(a * w + b)
                                        : static_cast<std::size_t>(b * w + a);
            out[at] = acc;
        }
    }
    return out;
}

std::vector<std::uint8_t> morph(std::span<const std::uint8_t> mask, long h, long w,
                                long radius, bool dilate) {
    // A square structuring element separates into a row pass and a column pass.
    std::vector<std::uint8_t> tmp = window_pass(mask, h, w, radius, dilate, true);
    return window_pass(tmp, h, w, radius, dilate, false);
}

nlohmann::json summary_json(const SummaryStats& s) {
    nlohmann::json j;
    j["mean"] = round_g9(s.mean);
    j["p50"] = round_g9(s.p50);
    j["p95"] = round_g9(s.p95);
    j["max"] = round_g9(s.max);
    j["count"] = s.count;
    return j;
}

} // namespace

const char* token_class_name(TokenClass c) {
    switch (c) {
        case TokenClass::boundary_heavy: return "boundary_heavy";
        case TokenClass::non_boundary: return "non_boundary";
        case TokenClass::excluded: return "excluded";
    }
    return "excluded";
}

double global_clip_factor(const Tensor& x, double c, double eps_std) {
    if (x.dtype() != DType::f32 || x.size() == 0)
        throw ShapeError("global_clip_factor: expected a non-empty tensor of reals");
    if (!(std::isfinite(c) && c >= 0.0))
        throw InvalidRadius("global_clip_factor: radius must be finite and >= 0");
    return c / (population_std_f32(x.f32()) + eps_std);
}

double zero_bin_mass(std::span<const float> values, double delta) {
    if (values.empty())
        throw ShapeError("zero_bin_mass: empty value list");
    if (!(std::isfinite(delta) && delta > 0.0))
        throw InvalidRadius("zero_bin_mass: step must be finite and > 0");
    const double half = delta / 2.0;
    long zeros = 0;
    for (float v : values)
        if (std::fabs(static_cast<double>(v)) <= half) ++zeros;
    return static_cast<double>(zeros) / static_cast<double>(values.size());
}

double range_disparity(const Tensor& x, double eps_std) {
    if (x.dtype() != DType::f32 || x.ndim() < 1 || x.size() == 0)
        throw ShapeError("range_disparity: expected a non-empty tensor of reals");
    const long channels = static_cast<long>(x.shape().back());
    const long tokens = static_cast<long>(x.size()) / channels;
    auto v = x.f32();
    double peak = 0.0;
    std::vector<double> med_tokens(static_cast<std::size_t>(tokens));
    std::vector<double> mags(static_cast<std::size_t>(channels));
    for (long t = 0; t < tokens; ++t) {
        for (long j = 0; j < channels; ++j) {
            const double m = std::fabs(static_cast<double>(v[static_cast<std::size_t>(t * channels + j)]));
            mags[static_cast<std::size_t>(j)] = m;
            peak = std::max(peak, m);
        }
        med_tokens[static_cast<std::size_t>(t)] = lower_median(mags);
    }
    const double denom = std::max(lower_median(med_tokens), eps_std);
    return peak / denom;
}

Tensor boundary_band(const Tensor& mask, int r_in, int r_out) {
    if (mask.dtype() != DType::u8 || mask.ndim() != 2)
        throw InvalidMask("boundary_band: mask must be a 2-d byte tensor");
    if (r_in < 0 || r_out < 0)
        throw ConfigError("boundary_band: radii must be >= 0");
    for (std::uint8_t v : mask.u8())
        if (v > 1)
            throw InvalidMask("boundary_band: mask values must be 0 or 1");
    const long h = static_cast<long>(mask.dim(0));
    const long w = static_cast<long>(mask.dim(1));
    const std::vector<std::uint8_t> dil = morph(mask.u8(), h, w, r_out, true);
    const std::vector<std::uint8_t> ero = morph(mask.u8(), h, w, r_in, false);
    Tensor band = Tensor::zeros(mask.shape(), DType::u8);
    auto out = band.u8();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::uint8_t>(dil[i] && !ero[i]);
    return band;
}

std::vector<double> token_occupancy(const Tensor& band, std::size_t grid_h, std::size_t grid_w) {
    if (band.dtype() != DType::u8 || band.ndim() != 2)
        throw InvalidMask("token_occupancy: band must be a 2-d byte tensor");
    if (grid_h == 0 || grid_w == 0)
        throw GridError("token_occupancy: grid extents must be positive");
    const std::size_t h = band.dim(0), w = band.dim(1);
    if (h % grid_h != 0 || w % grid_w != 0)
        throw GridError("token_occupancy: grid does not tile the band (" + std::to_string(h) + "x" +
                        std::to_string(w) + " vs " + std::to_string(grid_h) + "x" + std::to_string(grid_w) + ")");
    const std::size_t ph = h / grid_h, pw = w / grid_w;
    auto v = band.u8();
    std::vector<double> occ(grid_h * grid_w, 0.0);
    for (std::size_t gr = 0; gr < grid_h; ++gr) {
        for (std::size_t gc = 0; gc < grid_w; ++gc) {
            long count = 0;
            for (std::size_t i = 0; i < ph; ++i)
                for (std::size_t j = 0; j < pw; ++j)
                    count += v[(gr * ph + i) * w + (gc * pw + j)];
            occ[gr * grid_w + gc] = static_cast<double>(count) / static_cast<double>(ph * pw);
        }
    }
    return occ;
}

std::vector<TokenClass> classify_tokens(std::span<const double> occupancy, const BoundaryProtocol& bp) {
    if (!(bp.gamma_nonbdry < bp.gamma_bdry))
        throw ConfigError("classify_tokens: gamma_nonbdry must be < gamma_bdry");
    std::vector<TokenClass> out;
    out.reserve(occupancy.size());
    for (double pi : occupancy) {
        if (pi >= bp.gamma_bdry)
            out.push_back(TokenClass::boundary_heavy);
        else if (pi <= bp.gamma_nonbdry)
            out.push_back(TokenClass::non_boundary);
        else
            out.push_back(TokenClass::excluded);
    }
    return out;
}

SummaryStats summarize(std::span<const double> values) {
    SummaryStats s;
    s.count = static_cast<long>(values.size());
    if (values.empty()) return s;
    double sum = 0.0;
    double mx = values[0];
    for (double v : values) {
        sum += v;
        mx = std::max(mx, v);
    }
    s.mean = sum / static_cast<double>(values.size());
    s.max = mx;
    std::vector<double> tmp(values.begin(), values.end());
    const long k50 = quantile_rank(0.5, static_cast<long>(tmp.size()));
    std::nth_element(tmp.begin(), tmp.begin() + (k50 - 1), tmp.end());
    s.p50 = tmp[static_cast<std::size_t>(k50 - 1)];
    tmp.assign(values.begin(), values.end());
    const long k95 = quantile_rank(0.95, static_cast<long>(tmp.size()));
    std::nth_element(tmp.begin(), tmp.begin() + (k95 - 1), tmp.end());
    s.p95 = tmp[static_cast<std::size_t>(k95 - 1)];
    return s;
}

DiagnosticsReport build_report(const QuantizeResult& qr, std::span<const TokenClass> labels,
                               const Tensor& x, const QuantConfig& cfg) {
    if (!labels.empty() && static_cast<long>(labels.size()) != qr.tokens)
        throw ShapeError("build_report: label count does not match token count");
    if (qr.stats.empty())
        throw ShapeError("build_report: no group statistics");
    if (static_cast<long>(x.size()) != qr.tokens * qr.channels)
        throw ShapeError("build_report: tensor does not match the quantization result");

    const bool classed = !labels.empty() && cfg.mode == QuantMode::per_token_group;

    DiagnosticsReport rep;
    rep.c_g = global_clip_factor(x, qr.shared_radius, cfg.eps_std);
    rep.range_disparity = range_disparity(x, cfg.eps_std);
    rep.delta_tensor = qr.shared_step;

    // Group-level pools keyed by token class.
    std::map<std::string, std::vector<double>> eta_pool, rho_pool;
    std::vector<double> deltas;
    deltas.reserve(qr.stats.size());
    long c1_pre = 0, c1_post = 0, c2_pre = 0, c2_post = 0;
    for (const GroupStats& g : qr.stats) {
        deltas.push_back(g.delta);
        std::string cls = "all";
        if (classed)
            cls = token_class_name(labels[static_cast<std::size_t>(g.token_index)]);
        eta_pool[cls].push_back(g.eta);
        rho_pool[cls].push_back(g.rho0);
        if (cfg.tau) {
            const double bound = *cfg.tau * (g.sigma + cfg.eps_std);
            if (qr.shared_step > bound) ++c1_pre;
            if (g.delta > bound) ++c1_post;
        }
        if (cfg.zero_ratio) {
            if (g.rho0_shared > *cfg.zero_ratio) ++c2_pre;
            if (g.rho0 > *cfg.zero_ratio) ++c2_post;
        }
    }
    rep.delta = summarize(deltas);
    for (auto& [cls, pool] : eta_pool) rep.eta[cls] = summarize(pool);
    for (auto& [cls, pool] : rho_pool) rep.rho0[cls] = summarize(pool);
    const double n_groups = static_cast<double>(qr.stats.size());
    if (cfg.tau) {
        rep.c1_violation_pre = static_cast<double>(c1_pre) / n_groups;
        rep.c1_violation_post = static_cast<double>(c1_post) / n_groups;
    }
    if (cfg.zero_ratio) {
        rep.c2_violation_pre = static_cast<double>(c2_pre) / n_groups;
        rep.c2_violation_post = static_cast<double>(c2_post) / n_groups;
    }

    // Element-level zero-bin mass pooled by token class. Every element is
    // judged against the final step of the group it belongs to, so this is
    // meaningful in every mode, including shared-range quantizers.
    auto v = x.f32();
    std::map<std::string, long> zero_count, elem_count;
    for (long t = 0; t < qr.tokens; ++t) {
        std::string cls = "all";
        if (!labels.empty())
            cls = token_class_name(labels[static_cast<std::size_t>(t)]);
        for (long j = 0; j < qr.channels; ++j) {
            const GroupStats* g = nullptr;
            if (cfg.mode == QuantMode::per_tensor)
                g = &qr.stats[0];
            else if (cfg.mode == QuantMode::per_channel)
                g = &qr.stats[static_cast<std::size_t>(j)];
            else
                g = &qr.stats[static_cast<std::size_t>(t * qr.groups_per_token + j / cfg.group_size)];
            const double xv = static_cast<double>(v[static_cast<std::size_t>(t * qr.channels + j)]);
            const double xt = std::clamp(xv, -g->c_final, g->c_final);
            if (round_half_even(xt / g->delta) == 0) ++zero_count[cls];
            ++elem_count[cls];
        }
    }
    for (auto& [cls, n] : elem_count)
        rep.rho0_elements[cls] = static_cast<double>(zero_count[cls]) / static_cast<double>(n);

    if (labels.empty()) {
        rep.token_counts["all"] = qr.tokens;
    } else {
        for (TokenClass c : labels) ++rep.token_counts[token_class_name(c)];
    }
    if (classed) {
        for (const GroupStats& g : qr.stats)
            ++rep.group_counts[token_class_name(labels[static_cast<std::size_t>(g.token_index)])];
    } else {
        rep.group_counts["all"] = static_cast<long>(qr.stats.size());
    }
    return rep;
}

std::string report_to_json(const DiagnosticsReport& r, int indent) {
    nlohmann::json j;
    j["c_g"] = round_g9(r.c_g);
    j["range_disparity"] = round_g9(r.range_disparity);
    j["delta_tensor"] = round_g9(r.delta_tensor);
    j["delta"] = summary_json(r.delta);
    for (const auto& [cls, s] : r.eta) j["eta"][cls] = summary_json(s);
    for (const auto& [cls, s] : r.rho0) j["rho0"][cls] = summary_json(s);
    for (const auto& [cls, v] : r.rho0_elements) j["rho0_elements"][cls] = round_g9(v);
    j["c1_violation_pre"] = r.c1_violation_pre ? nlohmann::json(round_g9(*r.c1_violation_pre)) : nlohmann::json();
    j["c1_violation_post"] = r.c1_violation_post ? nlohmann::json(round_g9(*r.c1_violation_post)) : nlohmann::json();
    j["c2_violation_pre"] = r.c2_violation_pre ? nlohmann::json(round_g9(*r.c2_violation_pre)) : nlohmann::json();
    j["c2_violation_post"] = r.c2_violation_post ? nlohmann::json(round_g9(*r.c2_violation_post)) : nlohmann::json();
    j["counts"]["groups"] = r.group_counts;
    j["counts"]["tokens"] = r.token_counts;
    return j.dump(indent) + "\n";
}

namespace {

void csv_class_columns(const DiagnosticsReport& r, std::vector<std::string>& names,
                       std::vector<std::string>& values) {
    auto add = [&](const std::string& n, const std::string& v) {
        names.push_back(n);
        values.push_back(v);
    };
    for (const auto& [cls, s] : r.eta) {
        add("eta_" + cls + "_mean", format_g9(s.mean));
        add("eta_" + cls + "_p50", format_g9(s.p50));
        add("eta_" + cls + "_p95", format_g9(s.p95));
        add("eta_" + cls + "_max", format_g9(s.max));
    }
    for (const auto& [cls, s] : r.rho0) {
        add("rho0_" + cls + "_mean", format_g9(s.mean));
        add("rho0_" + cls + "_p50", format_g9(s.p50));
        add("rho0_" + cls + "_p95", format_g9(s.p95));
        add("rho0_" + cls + "_max", format_g9(s.max));
    }
    for (const auto& [cls, v] : r.rho0_elements)
        add("rho0_elements_" + cls, format_g9(v));
    for (const auto& [cls, n] : r.group_counts)
        add("groups_" + cls, std::to_string(n));
    for (const auto& [cls, n] : r.token_counts)
        add("tokens_" + cls, std::to_string(n));
}

void csv_columns(const DiagnosticsReport& r, std::vector<std::string>& names,
                 std::vector<std::string>& values) {
    auto add = [&](const std::string& n, const std::string& v) {
        names.push_back(n);
        values.push_back(v);
    };
    auto opt = [&](const std::optional<double>& v) { return v ? format_g9(*v) : std::string(); };
    add("c_g", format_g9(r.c_g));
    add("range_disparity", format_g9(r.range_disparity));
    add("delta_tensor", format_g9(r.delta_tensor));
    add("delta_mean", format_g9(r.delta.mean));
    add("delta_p50", format_g9(r.delta.p50));
    add("delta_p95", format_g9(r.delta.p95));
    add("delta_max", format_g9(r.delta.max));
    add("c1_violation_pre", opt(r.c1_violation_pre));
    add("c1_violation_post", opt(r.c1_violation_post));
    add("c2_violation_pre", opt(r.c2_violation_pre));
    add("c2_violation_post", opt(r.c2_violation_post));
    csv_class_columns(r, names, values);
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ",";
        out += parts[i];
    }
    out += "\n";
    return out;
}

} // namespace

std::string report_csv_header(const DiagnosticsReport& r) {
    std::vector<std::string> names, values;
    csv_columns(r, names, values);
    return join(names);
}

std::string report_csv_row(const DiagnosticsReport& r) {
    std::vector<std::string> names, values;
    csv_columns(r, names, values);
    return join(values);
}

} // namespace tgq
