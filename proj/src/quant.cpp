#include "tgq/quant.hpp"

#include <algorithm>
#include <cmath>

#include "tgq/errors.hpp"

namespace tgq {
namespace {

// Ascending-index summation in 64-bit keeps every reduction deterministic.
double population_std(std::span<const double> v) {
    const std::size_t n = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(n);
    double acc = 0.0;
    for (double x : v) {
        const double d = x - mean;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(n));
}

int qmax_for(int bits) { return (1 << (bits - 1)) - 1; }
int qmin_for(int bits) { return -(1 << (bits - 1)); }

void check_bits(int bits, const char* who) {
    if (bits < 2 || bits > 8)
        throw ConfigError(std::string(who) + ": bits must be in [2, 8]");
}

struct GroupOutcome {
    Projection proj;
    std::vector<int> q;
    std::vector<double> x_hat;
};

GroupStats make_stats(long token, long index, const GroupOutcome& g,
                      std::span<const double> values, const QuantConfig& cfg,
                      double shared_radius, double shared_step) {
    GroupStats s;
    s.token_index = token;
    s.group_index = index;
    s.c_base = g.proj.c_base;
    s.c_tau = g.proj.c_tau;
    s.c_zr = g.proj.c_zr;
    s.c_final = g.proj.c_final;
    s.delta = g.proj.delta;
    s.sigma = g.proj.sigma;
    s.eta = g.proj.delta / (g.proj.sigma + cfg.eps_std);
    long zeros = 0;
    for (int q : g.q)
        if (q == 0) ++zeros;
    s.rho0 = static_cast<double>(zeros) / static_cast<double>(g.q.size());
    long zeros_shared = 0;
    long clipped = 0;
    for (double x : values) {
        const double xt = std::clamp(x, -shared_radius, shared_radius);
        if (round_half_even(xt / shared_step) == 0) ++zeros_shared;
        if (std::fabs(x) > g.proj.c_final) ++clipped;
    }
    s.rho0_shared = static_cast<double>(zeros_shared) / static_cast<double>(values.size());
    s.clipped = clipped;
    return s;
}

} // namespace

void QuantConfig::validate() const {
    check_bits(act_bits, "QuantConfig.act_bits");
    check_bits(weight_bits, "QuantConfig.weight_bits");
    if (group_size < 1)
        throw ConfigError("QuantConfig.group_size: must be >= 1");
    if (tau && !(*tau > 0.0 && std::isfinite(*tau)))
        throw ConfigError("QuantConfig.tau: must be finite and > 0");
    if (zero_ratio && !(*zero_ratio > 0.0 && *zero_ratio <= 1.0))
        throw ConfigError("QuantConfig.zero_ratio: must lie in (0, 1]");
    if (percentile && !(*percentile > 0.0 && *percentile <= 1.0))
        throw ConfigError("QuantConfig.percentile: must lie in (0, 1]");
    if (!(eps_scale > 0.0) || !(eps_std > 0.0))
        throw ConfigError("QuantConfig: eps_scale and eps_std must be > 0");
}

Variant parse_variant(const std::string& name) {
    if (name == "naive_w4a4") return Variant::naive_w4a4;
    if (name == "per_tensor") return Variant::per_tensor;
    if (name == "dstg_only") return Variant::dstg_only;
    if (name == "dcrp_only") return Variant::dcrp_only;
    if (name == "c1_only") return Variant::c1_only;
    if (name == "c2_only") return Variant::c2_only;
    if (name == "full") return Variant::full;
    throw ConfigError("unknown variant '" + name +
                      "' (expected naive_w4a4, per_tensor, dstg_only, dcrp_only, c1_only, c2_only, full)");
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::naive_w4a4: return "naive_w4a4";
        case Variant::per_tensor: return "per_tensor";
        case Variant::dstg_only: return "dstg_only";
        case Variant::dcrp_only: return "dcrp_only";
        case Variant::c1_only: return "c1_only";
        case Variant::c2_only: return "c2_only";
        case Variant::full: return "full";
    }
    return "full";
}

QuantConfig variant_config(Variant v, QuantConfig base) {
    switch (v) {
        case Variant::naive_w4a4:
        case Variant::per_tensor:
            base.mode = QuantMode::per_tensor;
            base.tau.reset();
            base.zero_ratio.reset();
            break;
        case Variant::dstg_only:
            base.mode = QuantMode::per_token_group;
            base.tau.reset();
            base.zero_ratio.reset();
            break;
        case Variant::dcrp_only:
            base.mode = QuantMode::per_tensor;
            break;
        case Variant::c1_only:
            base.mode = QuantMode::per_tensor;
            base.zero_ratio.reset();
            break;
        case Variant::c2_only:
            base.mode = QuantMode::per_tensor;
            base.tau.reset();
            break;
        case Variant::full:
            base.mode = QuantMode::per_token_group;
            break;
    }
    return base;
}

long long round_half_even(double x) {
    const double f = std::floor(x);
    const double frac = x - f;
    const long long lo = static_cast<long long>(f);
    if (frac < 0.5) return lo;
    if (frac > 0.5) return lo + 1;
    return (lo % 2 == 0) ? lo : lo + 1;
}

QdqResult qdq_with_step(std::span<const double> x, double c, double delta, int bits) {
    check_bits(bits, "qdq_with_step");
    if (!(std::isfinite(c) && c > 0.0))
        throw InvalidRadius("qdq_with_step: clip radius must be finite and > 0");
    if (!(std::isfinite(delta) && delta > 0.0))
        throw InvalidRadius("qdq_with_step: step must be finite and > 0");
    const int qmax = qmax_for(bits);
    const int qmin = qmin_for(bits);
    QdqResult out;
    out.delta = delta;
    out.q.reserve(x.size());
    out.x_hat.reserve(x.size());
    for (double v : x) {
        const double xt = std::clamp(v, -c, c);
        long long q = round_half_even(xt / delta);
        q = std::clamp<long long>(q, qmin, qmax);
        out.q.push_back(static_cast<int>(q));
        // The final clamp only matters when delta*qmax lands one ulp past c.
        out.x_hat.push_back(std::clamp(delta * static_cast<double>(q), -c, c));
    }
    return out;
}

QdqResult symmetric_qdq(std::span<const double> x, double c, int bits, double eps_scale) {
    check_bits(bits, "symmetric_qdq");
    if (!(std::isfinite(c) && c > 0.0))
        throw InvalidRadius("symmetric_qdq: clip radius must be finite and > 0");
    const double delta = std::max(c / static_cast<double>(qmax_for(bits)), eps_scale);
    return qdq_with_step(x, c, delta, bits);
}

TokenGroups partition_token(std::span<const float> token, int group_size) {
    if (group_size < 1)
        throw ConfigError("partition_token: group_size must be >= 1");
    if (token.empty())
        throw ShapeError("partition_token: empty token");
    TokenGroups out;
    const long c = static_cast<long>(token.size());
    out.groups = (c + group_size - 1) / group_size;
    out.pad = out.groups * group_size - c;
    out.padded.assign(static_cast<std::size_t>(out.groups) * group_size, 0.0);
    for (long i = 0; i < c; ++i)
        out.padded[static_cast<std::size_t>(i)] = static_cast<double>(token[static_cast<std::size_t>(i)]);
    return out;
}

long quantile_rank(double p, long n) {
    // ceil of the real product; the nudge keeps products that are exact
    // integers in real arithmetic from drifting up one rank in binary.
    long k = static_cast<long>(std::ceil(p * static_cast<double>(n) - 1e-9));
    return std::clamp<long>(k, 1, n);
}

double magnitude_quantile(std::span<const double> group, double p) {
    if (group.empty())
        throw ShapeError("magnitude_quantile: empty group");
    const long k = quantile_rank(p, static_cast<long>(group.size()));
    std::vector<double> mags(group.size());
    for (std::size_t i = 0; i < group.size(); ++i) mags[i] = std::fabs(group[i]);
    std::nth_element(mags.begin(), mags.begin() + (k - 1), mags.end());
    return mags[static_cast<std::size_t>(k - 1)];
}

double base_radius(std::span<const double> group, std::optional<double> percentile) {
    if (group.empty())
        throw ShapeError("base_radius: empty group");
    if (!percentile) {
        double m = 0.0;
        for (double v : group) m = std::max(m, std::fabs(v));
        return m;
    }
    if (!(*percentile > 0.0 && *percentile <= 1.0))
        throw ConfigError("base_radius: percentile must lie in (0, 1]");
    return magnitude_quantile(group, *percentile);
}

double group_std(std::span<const double> group, double eps_std) {
    if (group.empty())
        throw ShapeError("group_std: empty group");
    return population_std(group) + eps_std;
}

Projection project_group_radius(double c_base, std::span<const double> group, const QuantConfig& cfg) {
    if (!(std::isfinite(c_base) && c_base >= 0.0))
        throw InvalidRadius("project_group_radius: base radius must be finite and >= 0");
    if (group.empty())
        throw ShapeError("project_group_radius: empty group");
    const double qmax = static_cast<double>(cfg.act_qmax());

    Projection p;
    p.c_base = c_base;
    p.sigma = population_std(group);

    double c = c_base;
    double step = c_base / qmax;
    if (cfg.tau) {
        const double step_tau = *cfg.tau * (p.sigma + cfg.eps_std);
        p.c_tau = qmax * step_tau;
        c = std::min(c, *p.c_tau);
        step = std::min(step, step_tau);
    }
    if (cfg.zero_ratio) {
        const double q = magnitude_quantile(group, *cfg.zero_ratio);
        const double step_zr = 2.0 * q;
        p.c_zr = 2.0 * qmax * q;
        c = std::min(c, *p.c_zr);
        step = std::min(step, step_zr);
    }
    p.c_final = std::max(c, cfg.eps_scale);
    p.delta = std::max(step, cfg.eps_scale);
    return p;
}

QuantizeResult quantize_activations(const Tensor& x, const QuantConfig& cfg) {
    cfg.validate();
    if (x.dtype() != DType::f32)
        throw ShapeError("quantize_activations: activation tensor must hold 32-bit reals");
    if (x.ndim() < 1 || x.size() == 0)
        throw ShapeError("quantize_activations: tensor must have at least one axis");
    if (!x.all_finite())
        throw NonFiniteInput("quantize_activations: input contains NaN or Inf");

    const long channels = static_cast<long>(x.shape().back());
    const long tokens = static_cast<long>(x.size()) / channels;
    auto in = x.f32();

    QuantizeResult res;
    res.x_hat = Tensor::zeros(x.shape(), DType::f32);
    res.tokens = tokens;
    res.channels = channels;
    auto out = res.x_hat.f32();

    const double qmax = static_cast<double>(cfg.act_qmax());

    if (cfg.mode == QuantMode::per_tensor) {
        std::vector<double> all(in.begin(), in.end());
        const double c_base = base_radius(all, cfg.percentile);
        res.shared_radius = c_base;
        res.shared_step = std::max(c_base / qmax, cfg.eps_scale);
        GroupOutcome g;
        g.proj = project_group_radius(c_base, all, cfg);
        QdqResult r = qdq_with_step(all, g.proj.c_final, g.proj.delta, cfg.act_bits);
        g.q = std::move(r.q);
        g.x_hat = std::move(r.x_hat);
        for (std::size_t i = 0; i < g.x_hat.size(); ++i)
            out[i] = static_cast<float>(g.x_hat[i]);
        res.groups_per_token = 1;
        res.stats.push_back(make_stats(0, 0, g, all, cfg, res.shared_radius, res.shared_step));
        return res;
    }

    if (cfg.mode == QuantMode::per_channel) {
        // One max-abs radius per channel column; the dual-constraint
        // projection does not apply in this mode.
        std::vector<double> column(static_cast<std::size_t>(tokens));
        std::vector<double> radii(static_cast<std::size_t>(channels), 0.0);
        for (long j = 0; j < channels; ++j) {
            double m = 0.0;
            for (long t = 0; t < tokens; ++t)
                m = std::max(m, std::fabs(static_cast<double>(in[static_cast<std::size_t>(t * channels + j)])));
            radii[static_cast<std::size_t>(j)] = m;
        }
        res.shared_radius = *std::max_element(radii.begin(), radii.end());
        res.shared_step = std::max(res.shared_radius / qmax, cfg.eps_scale);
        for (long j = 0; j < channels; ++j) {
            for (long t = 0; t < tokens; ++t)
                column[static_cast<std::size_t>(t)] =
                    static_cast<double>(in[static_cast<std::size_t>(t * channels + j)]);
            GroupOutcome g;
            const double c = std::max(radii[static_cast<std::size_t>(j)], cfg.eps_scale);
            g.proj.c_base = radii[static_cast<std::size_t>(j)];
            g.proj.sigma = population_std(column);
            g.proj.c_final = c;
            g.proj.delta = std::max(c / qmax, cfg.eps_scale);
            QdqResult r = qdq_with_step(column, g.proj.c_final, g.proj.delta, cfg.act_bits);
            g.q = std::move(r.q);
            g.x_hat = std::move(r.x_hat);
            for (long t = 0; t < tokens; ++t)
                out[static_cast<std::size_t>(t * channels + j)] = static_cast<float>(g.x_hat[static_cast<std::size_t>(t)]);
            res.stats.push_back(make_stats(0, j, g, column, cfg, res.shared_radius, res.shared_step));
        }
        res.groups_per_token = channels;
        return res;
    }

    // per_token_group: pad each token to a multiple of g, then project and
    // quantize each group independently. Padded zeros take part in every
    // group statistic; only real positions are written back.
    std::vector<TokenGroups> parts(static_cast<std::size_t>(tokens));
    double shared = 0.0;
    std::vector<double> bases;
    for (long t = 0; t < tokens; ++t) {
        parts[static_cast<std::size_t>(t)] =
            partition_token(in.subspan(static_cast<std::size_t>(t * channels), static_cast<std::size_t>(channels)),
                            cfg.group_size);
        const TokenGroups& tg = parts[static_cast<std::size_t>(t)];
        for (long k = 0; k < tg.groups; ++k) {
            std::span<const double> grp(tg.padded.data() + static_cast<std::size_t>(k) * cfg.group_size,
                                        static_cast<std::size_t>(cfg.group_size));
            const double b = base_radius(grp, cfg.percentile);
            bases.push_back(b);
            shared = std::max(shared, b);
        }
    }
    res.shared_radius = shared;
    res.shared_step = std::max(shared / qmax, cfg.eps_scale);
    res.groups_per_token = parts.empty() ? 0 : parts[0].groups;
    res.pad = parts.empty() ? 0 : parts[0].pad;

    std::size_t base_idx = 0;
    for (long t = 0; t < tokens; ++t) {
        const TokenGroups& tg = parts[static_cast<std::size_t>(t)];
        for (long k = 0; k < tg.groups; ++k, ++base_idx) {
            std::span<const double> grp(tg.padded.data() + static_cast<std::size_t>(k) * cfg.group_size,
                                        static_cast<std::size_t>(cfg.group_size));
            GroupOutcome g;
            g.proj = project_group_radius(bases[base_idx], grp, cfg);
            QdqResult r = qdq_with_step(grp, g.proj.c_final, g.proj.delta, cfg.act_bits);
            g.q = std::move(r.q);
            g.x_hat = std::move(r.x_hat);
            const long start = k * cfg.group_size;
            const long stop = std::min<long>(start + cfg.group_size, channels);
            for (long i = start; i < stop; ++i)
                out[static_cast<std::size_t>(t * channels + i)] =
                    static_cast<float>(g.x_hat[static_cast<std::size_t>(i - start)]);
            res.stats.push_back(make_stats(t, k, g, grp, cfg, res.shared_radius, res.shared_step));
        }
    }
    return res;
}

Tensor apply_frozen_radii(const Tensor& x, const FrozenRadii& radii, const QuantConfig& cfg) {
    cfg.validate();
    if (x.dtype() != DType::f32)
        throw ShapeError("apply_frozen_radii: activation tensor must hold 32-bit reals");
    if (x.ndim() < 1 || x.size() == 0)
        throw ShapeError("apply_frozen_radii: tensor must have at least one axis");
    if (!x.all_finite())
        throw NonFiniteInput("apply_frozen_radii: input contains NaN or Inf");
    for (double r : radii.radius)
        if (!(std::isfinite(r) && r > 0.0))
            throw InvalidRadius("apply_frozen_radii: radii must be finite and > 0");
    if (!radii.step.empty() && radii.step.size() != radii.radius.size())
        throw ShapeError("apply_frozen_radii: step list does not match radius list");

    const double qmax = static_cast<double>(cfg.act_qmax());
    auto step_for = [&](std::size_t i) {
        if (!radii.step.empty()) return radii.step[i];
        return std::max(radii.radius[i] / qmax, cfg.eps_scale);
    };

    auto in = x.f32();
    Tensor result = Tensor::zeros(x.shape(), DType::f32);
    auto out = result.f32();

    if (radii.mode == QuantMode::per_tensor) {
        if (radii.radius.size() != 1)
            throw ShapeError("apply_frozen_radii: per_tensor expects exactly one radius");
        std::vector<double> all(in.begin(), in.end());
        QdqResult r = qdq_with_step(all, radii.radius[0], step_for(0), cfg.act_bits);
        for (std::size_t i = 0; i < r.x_hat.size(); ++i)
            out[i] = static_cast<float>(r.x_hat[i]);
        return result;
    }
    if (radii.mode != QuantMode::per_token_group)
        throw ConfigError("apply_frozen_radii: unsupported frozen mode");

    const long channels = static_cast<long>(x.shape().back());
    const long tokens = static_cast<long>(x.size()) / channels;
    std::size_t gi = 0;
    for (long t = 0; t < tokens; ++t) {
        TokenGroups tg = partition_token(
            in.subspan(static_cast<std::size_t>(t * channels), static_cast<std::size_t>(channels)),
            radii.group_size);
        if (gi + static_cast<std::size_t>(tg.groups) > radii.radius.size())
            throw ShapeError("apply_frozen_radii: radius list shorter than group count");
        for (long k = 0; k < tg.groups; ++k, ++gi) {
            std::span<const double> grp(tg.padded.data() + static_cast<std::size_t>(k) * radii.group_size,
                                        static_cast<std::size_t>(radii.group_size));
            QdqResult r = qdq_with_step(grp, radii.radius[gi], step_for(gi), cfg.act_bits);
            const long start = k * radii.group_size;
            const long stop = std::min<long>(start + radii.group_size, channels);
            for (long i = start; i < stop; ++i)
                out[static_cast<std::size_t>(t * channels + i)] =
                    static_cast<float>(r.x_hat[static_cast<std::size_t>(i - start)]);
        }
    }
    if (gi != radii.radius.size())
        throw ShapeError("apply_frozen_radii: radius list longer than group count");
    return result;
}

} // namespace tgq
