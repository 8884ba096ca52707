// Acceptance suite. Each criterion prints exactly one [PASS]/[FAIL] line
// with its key measurements; the process exits nonzero if any selected
// criterion fails. Run with no arguments for all criteria, or pass the
// criterion numbers to run, e.g. "acceptance 1 3".
//
// Tolerances are pinned here on purpose: exact comparisons where the
// quantizer gives exact guarantees, 1e-6 headroom on the rounding bounds,
// 1e-5 relative error for the accumulated linear layer.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "tgq/diagnostics.hpp"
#include "tgq/layer.hpp"
#include "tgq/npy.hpp"
#include "tgq/quant.hpp"
#include "tgq/rng.hpp"
#include "tgq/synth.hpp"
#include "tgq/tensor.hpp"
#include "tgq/weights.hpp"

namespace fs = std::filesystem;
using namespace tgq;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

// Random-group corpus shared by criteria 1 and 3: every combination of
// group size, tau, zr and distribution, 100 groups each, mixed scales.
constexpr int kGroupSizes[] = {8, 16, 32, 64};
constexpr double kTaus[] = {0.5, 1.0, 2.0};
constexpr double kZrs[] = {0.1, 0.2, 0.4};
constexpr double kScales[] = {0.1, 1.0, 100.0};

double next_laplace(Rng& rng) {
    double u;
    do {
        u = rng.next_unit();
    } while (u <= 0.0 || u >= 1.0);
    const double t = u - 0.5;
    const double mag = -std::log(1.0 - 2.0 * std::fabs(t));
    return t < 0.0 ? -mag : mag;
}

std::vector<double> draw_group(Rng& rng, int dist, int g, double scale) {
    std::vector<double> v(static_cast<std::size_t>(g));
    for (double& x : v)
        x = scale * (dist == 1 ? next_laplace(rng) : rng.next_normal());
    if (dist == 2) {
        const double sign = rng.next_unit() < 0.5 ? -1.0 : 1.0;
        v[static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(g)))] =
            sign * 50.0 * scale;
    }
    return v;
}

template <typename Fn>
long for_each_group_case(Fn&& fn) {
    Rng rng(0x5eed2026u);
    long count = 0;
    for (int g : kGroupSizes)
        for (double tau : kTaus)
            for (double zr : kZrs)
                for (int dist = 0; dist < 3; ++dist)
                    for (int rep = 0; rep < 100; ++rep) {
                        const double scale = kScales[rep % 3];
                        fn(draw_group(rng, dist, g, scale), g, tau, zr);
                        ++count;
                    }
    return count;
}

QuantConfig case_config(int g, double tau, double zr) {
    QuantConfig cfg;
    cfg.group_size = g;
    cfg.tau = tau;
    cfg.zero_ratio = zr;
    return cfg;
}

// Criterion 1: the projected step obeys both constraints exactly and the
// zero-bin occupancy stays under zr + 1/g on every group, in under 5s.
Outcome criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    long bad_step = 0, bad_quantile = 0, bad_rho = 0;
    const long total = for_each_group_case([&](const std::vector<double>& v, int g, double tau,
                                               double zr) {
        const QuantConfig cfg = case_config(g, tau, zr);
        const Projection p = project_group_radius(base_radius(v, {}), v, cfg);
        if (!(p.delta <= tau * (p.sigma + cfg.eps_std))) ++bad_step;
        if (!(p.delta / 2.0 <= magnitude_quantile(v, zr))) ++bad_quantile;
        const QdqResult r = qdq_with_step(v, p.c_final, p.delta, cfg.act_bits);
        long zeros = 0;
        for (int q : r.q)
            if (q == 0) ++zeros;
        const double rho0 = static_cast<double>(zeros) / static_cast<double>(g);
        if (!(rho0 <= zr + 1.0 / static_cast<double>(g))) ++bad_rho;
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    Outcome o;
    o.pass = total >= 10000 && bad_step == 0 && bad_quantile == 0 && bad_rho == 0 && secs < 5.0;
    o.detail = fmt("%ld groups, violations: step %ld, quantile %ld, occupancy %ld, %.2fs",
                   total, bad_step, bad_quantile, bad_rho, secs);
    return o;
}

// Criterion 2: on the default synthetic tensor the dispersion constraint
// is violated by 0.00% of groups after projection and by a positive
// fraction on the shared-range grid before it.
Outcome criterion2() {
    const SynthResult syn = generate_synth(SynthSpec{});
    QuantConfig cfg; // defaults: per-token groups, both constraints active
    const QuantizeResult qr = quantize_activations(syn.x, cfg);
    const DiagnosticsReport rep = build_report(qr, {}, syn.x, cfg);

    Outcome o;
    const bool have = rep.c1_violation_pre.has_value() && rep.c1_violation_post.has_value();
    const double pre = have ? *rep.c1_violation_pre : -1.0;
    const double post = have ? *rep.c1_violation_post : -1.0;
    o.pass = have && post == 0.0 && pre > 0.0;
    o.detail = fmt("dispersion violations pre %.4f, post %.17g", pre, post);
    return o;
}

// Criterion 3: rounding error per element stays within delta/2 and the
// group L2 error within sqrt(g) * tau * sigma / 2, both with 1e-6 headroom.
Outcome criterion3() {
    long bad_elem = 0, bad_l2 = 0;
    const long total = for_each_group_case([&](const std::vector<double>& v, int g, double tau,
                                               double zr) {
        const QuantConfig cfg = case_config(g, tau, zr);
        const Projection p = project_group_radius(base_radius(v, {}), v, cfg);
        const QdqResult r = qdq_with_step(v, p.c_final, p.delta, cfg.act_bits);
        const double elem_bound = p.delta / 2.0 * (1.0 + 1e-6);
        double sq = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double xt = std::clamp(v[i], -p.c_final, p.c_final);
            const double err = std::fabs(r.x_hat[i] - xt);
            if (!(err <= elem_bound)) ++bad_elem;
            sq += err * err;
        }
        const double l2_bound = std::sqrt(static_cast<double>(g)) * tau *
                                (p.sigma + cfg.eps_std) / 2.0 * (1.0 + 1e-6);
        if (!(std::sqrt(sq) <= l2_bound)) ++bad_l2;
    });

    Outcome o;
    o.pass = bad_elem == 0 && bad_l2 == 0;
    o.detail = fmt("%ld groups, element-bound violations %ld, l2-bound violations %ld", total,
                   bad_elem, bad_l2);
    return o;
}

// Criterion 4: on the default synthetic tensor, naive per-tensor 4-bit
// flushes boundary tokens (rho0 >= 0.99), per-token groups with both
// constraints keep every boundary group at rho0 <= 0.23125, and naive
// per-tensor 8-bit keeps boundary rho0 under 0.2.
Outcome criterion4() {
    const SynthResult syn = generate_synth(SynthSpec{});
    std::vector<TokenClass> labels(syn.is_boundary.size(), TokenClass::non_boundary);
    for (std::size_t t = 0; t < labels.size(); ++t)
        if (syn.is_boundary[t]) labels[t] = TokenClass::boundary_heavy;

    const QuantConfig naive4 = variant_config(Variant::naive_w4a4, QuantConfig{});
    const QuantizeResult qr4 = quantize_activations(syn.x, naive4);
    const double rho_a4 =
        build_report(qr4, labels, syn.x, naive4).rho0_elements.at("boundary_heavy");
    const bool leg_a4 = rho_a4 >= 0.99;

    const QuantConfig full = variant_config(Variant::full, QuantConfig{});
    const QuantizeResult qrf = quantize_activations(syn.x, full);
    double worst_group = 0.0;
    for (const GroupStats& s : qrf.stats)
        if (syn.is_boundary[static_cast<std::size_t>(s.token_index)])
            worst_group = std::max(worst_group, s.rho0);
    const bool leg_full = worst_group <= 0.23125;

    QuantConfig base8;
    base8.act_bits = 8;
    const QuantConfig naive8 = variant_config(Variant::naive_w4a4, base8);
    const QuantizeResult qr8 = quantize_activations(syn.x, naive8);
    const double rho_a8 =
        build_report(qr8, labels, syn.x, naive8).rho0_elements.at("boundary_heavy");
    const bool leg_a8 = rho_a8 < 0.2;

    Outcome o;
    o.pass = leg_a4 && leg_full && leg_a8;
    o.detail = fmt("naive 4-bit boundary rho0 %.4f (need >= 0.99, %s); "
                   "grouped worst boundary-group rho0 %.5f (need <= 0.23125, %s); "
                   "naive 8-bit boundary rho0 %.4f (need < 0.2, %s)",
                   rho_a4, leg_a4 ? "ok" : "FAIL", worst_group, leg_full ? "ok" : "FAIL", rho_a8,
                   leg_a8 ? "ok" : "FAIL");
    return o;
}

// Brute-force morphology oracle for criterion 5.
std::vector<std::uint8_t> brute_band(const std::vector<std::uint8_t>& m, long h, long w,
                                     int r_in, int r_out) {
    auto at = [&](long y, long x) -> int {
        if (y < 0 || y >= h || x < 0 || x >= w) return 0;
        return m[static_cast<std::size_t>(y * w + x)];
    };
    std::vector<std::uint8_t> band(static_cast<std::size_t>(h * w), 0);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            int dil = 0, ero = 1;
            for (long dy = -r_out; dy <= r_out && !dil; ++dy)
                for (long dx = -r_out; dx <= r_out && !dil; ++dx)
                    if (at(y + dy, x + dx)) dil = 1;
            for (long dy = -r_in; dy <= r_in && ero; ++dy)
                for (long dx = -r_in; dx <= r_in && ero; ++dx)
                    if (!at(y + dy, x + dx)) ero = 0;
            band[static_cast<std::size_t>(y * w + x)] = static_cast<std::uint8_t>(dil && !ero);
        }
    return band;
}

// Criterion 5: selection-based quantiles match a full sort, the separable
// band matches brute-force morphology, and the quantized linear layer
// matches a scalar reference within 1e-5 relative Frobenius error.
Outcome criterion5() {
    Rng rng(0xacce5501u);

    long bad_quantile = 0;
    for (int n = 1; n <= 64; ++n)
        for (int rep = 0; rep < 1000; ++rep) {
            std::vector<double> v(static_cast<std::size_t>(n));
            const double scale = kScales[rep % 3];
            for (double& x : v) x = scale * rng.next_normal();
            const double p = 1.0 - rng.next_unit(); // (0, 1]
            std::vector<double> mags(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) mags[i] = std::fabs(v[i]);
            std::sort(mags.begin(), mags.end());
            const double expect = mags[static_cast<std::size_t>(quantile_rank(p, n) - 1)];
            if (magnitude_quantile(v, p) != expect) ++bad_quantile;
        }

    long bad_band = 0;
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<std::uint8_t> m(256);
        for (auto& b : m) b = rng.next_unit() < 0.35 ? 1 : 0;
        const int r_in = static_cast<int>(rng.next_below(3));
        const int r_out = r_in + static_cast<int>(rng.next_below(3));
        const Tensor band = boundary_band(Tensor::from_u8({16, 16}, m), r_in, r_out);
        const auto ref = brute_band(m, 16, 16, r_in, r_out);
        for (std::size_t i = 0; i < ref.size(); ++i)
            if (band.u8()[i] != ref[i]) ++bad_band;
    }

    long bad_linear = 0;
    double worst_rel = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const long tokens = 1 + static_cast<long>(rng.next_below(5));
        const long in_f = 8 * (1 + static_cast<long>(rng.next_below(4)));
        const long out_f = 1 + static_cast<long>(rng.next_below(10));
        std::vector<float> xd(static_cast<std::size_t>(tokens * in_f));
        for (float& v : xd) v = static_cast<float>(rng.next_normal() * kScales[rep % 3]);
        std::vector<float> wd(static_cast<std::size_t>(out_f * in_f));
        for (float& v : wd) v = static_cast<float>(rng.next_normal());
        const Tensor x = Tensor::from_f32({static_cast<std::size_t>(tokens),
                                           static_cast<std::size_t>(in_f)}, xd);

        QuantLinear layer;
        layer.weights = quantize_weights(
            Tensor::from_f32({static_cast<std::size_t>(out_f), static_cast<std::size_t>(in_f)},
                             wd),
            4);
        QuantConfig base;
        base.group_size = 8;
        layer.cfg = variant_config(Variant::full, base);
        if (rep % 2 == 0) {
            std::vector<float> bias(static_cast<std::size_t>(out_f));
            for (float& v : bias) v = static_cast<float>(rng.next_normal());
            layer.bias = bias;
        }
        const Tensor y = quant_linear_forward(x, layer);

        const QuantizeResult qx = quantize_activations(x, layer.cfg);
        const Tensor wh = dequantize_weights(layer.weights);
        double num = 0.0, den = 0.0;
        for (long t = 0; t < tokens; ++t)
            for (long of = 0; of < out_f; ++of) {
                double acc = 0.0;
                for (long i = 0; i < in_f; ++i)
                    acc += static_cast<double>(qx.x_hat.f32()[static_cast<std::size_t>(
                               t * in_f + i)]) *
                           static_cast<double>(wh.f32()[static_cast<std::size_t>(of * in_f + i)]);
                if (layer.bias) acc += static_cast<double>((*layer.bias)[static_cast<std::size_t>(of)]);
                const double got =
                    static_cast<double>(y.f32()[static_cast<std::size_t>(t * out_f + of)]);
                const double d = got - acc;
                num += d * d;
                den += acc * acc;
            }
        const double rel = den > 0.0 ? std::sqrt(num) / std::sqrt(den)
                                     : (num == 0.0 ? 0.0 : 1.0);
        worst_rel = std::max(worst_rel, rel);
        if (!(rel <= 1e-5)) ++bad_linear;
    }

    Outcome o;
    o.pass = bad_quantile == 0 && bad_band == 0 && bad_linear == 0;
    o.detail = fmt("quantile mismatches %ld/64000, band mismatches %ld, "
                   "linear instances over 1e-5: %ld (worst rel %.2e)",
                   bad_quantile, bad_band, bad_linear, worst_rel);
    return o;
}

const fs::path& scratch_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("tgq_acceptance_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run_cli(const std::string& tail) {
    const std::string cmd = std::string(TGQ_CLI_PATH) + " " + tail + " 2> /dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Criterion 6: nibble packing is lossless (exhaustively over byte values
// and on random matrices), the NPY writer round-trips, and the CLI writes
// byte-identical files across runs and thread environments.
Outcome criterion6() {
    Rng rng(0xacce5506u);

    long bad_nibble = 0;
    for (int lo = -8; lo <= 7; ++lo)
        for (int hi = -8; hi <= 7; ++hi) {
            const std::int8_t q[2] = {static_cast<std::int8_t>(lo), static_cast<std::int8_t>(hi)};
            const auto packed = pack_int4(q, 1, 2);
            const auto back = unpack_int4(packed, 1, 2);
            if (back.size() != 2 || back[0] != q[0] || back[1] != q[1]) ++bad_nibble;
        }

    long bad_matrix = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const long rows = 1 + static_cast<long>(rng.next_below(8));
        const long cols = 1 + static_cast<long>(rng.next_below(9));
        std::vector<std::int8_t> q(static_cast<std::size_t>(rows * cols));
        for (auto& v : q) v = static_cast<std::int8_t>(static_cast<long>(rng.next_below(16)) - 8);
        const auto back = unpack_int4(pack_int4(q, rows, cols), rows, cols);
        if (back != q) ++bad_matrix;
    }

    long bad_npy = 0;
    const std::vector<std::vector<std::size_t>> shapes = {{}, {1}, {7}, {3, 4}, {2, 3, 4}};
    for (const auto& shape : shapes) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        std::vector<float> data(n);
        for (float& v : data) v = static_cast<float>(rng.next_normal());
        const Tensor t = Tensor::from_f32(shape, data);
        std::ostringstream buf1;
        write_npy(t, buf1);
        std::istringstream in(buf1.str());
        const Tensor back = read_npy(in, "<roundtrip>");
        std::ostringstream buf2;
        write_npy(back, buf2);
        if (buf1.str() != buf2.str()) ++bad_npy;
        for (std::size_t i = 0; i < n; ++i)
            if (std::bit_cast<std::uint32_t>(back.f32()[i]) !=
                std::bit_cast<std::uint32_t>(t.f32()[i]))
                ++bad_npy;
    }

    const fs::path d = scratch_dir();
    const auto p = [&](const char* name) { return (d / name).string(); };
    bool cli_ok = run_cli("gen-synth --out " + p("a1.npy")) == 0 &&
                  run_cli("gen-synth --out " + p("a2.npy")) == 0;
    cli_ok = cli_ok && run_cli("quantize " + p("a1.npy") + " --output " + p("o1.npy") +
                               " --stats " + p("s1.json")) == 0;
    cli_ok = cli_ok && run_cli("quantize " + p("a1.npy") + " --output " + p("o2.npy") +
                               " --stats " + p("s2.json")) == 0;
    const std::string env1 = "OMP_NUM_THREADS=1 ";
    const std::string env8 = "OMP_NUM_THREADS=8 ";
    cli_ok = cli_ok && std::system((env1 + TGQ_CLI_PATH + " diagnose " + p("a1.npy") +
                                    " --report " + p("r1.json") + " 2> /dev/null")
                                       .c_str()) == 0;
    cli_ok = cli_ok && std::system((env8 + TGQ_CLI_PATH + " diagnose " + p("a1.npy") +
                                    " --report " + p("r8.json") + " 2> /dev/null")
                                       .c_str()) == 0;
    long bad_cli = 0;
    if (cli_ok) {
        if (slurp(d / "a1.npy") != slurp(d / "a2.npy")) ++bad_cli;
        if (slurp(d / "o1.npy") != slurp(d / "o2.npy")) ++bad_cli;
        if (slurp(d / "s1.json") != slurp(d / "s2.json")) ++bad_cli;
        if (slurp(d / "r1.json") != slurp(d / "r8.json")) ++bad_cli;
    }

    Outcome o;
    o.pass = bad_nibble == 0 && bad_matrix == 0 && bad_npy == 0 && cli_ok && bad_cli == 0;
    o.detail = fmt("nibble pairs bad %ld/256, matrices bad %ld/1000, npy bad %ld, "
                   "cli runs %s, unstable files %ld",
                   bad_nibble, bad_matrix, bad_npy, cli_ok ? "ok" : "FAILED", bad_cli);
    return o;
}

// Criterion 7: per-group steps never exceed the per-tensor step of the
// same tensor, exactly, on random tensors and the synthetic default.
Outcome criterion7() {
    Rng rng(0xacce5507u);
    long tensors = 0, bad = 0;

    auto check_tensor = [&](const Tensor& x, int g) {
        QuantConfig base;
        base.group_size = g;
        const QuantConfig full = variant_config(Variant::full, base);
        const QuantConfig naive = variant_config(Variant::naive_w4a4, base);
        const QuantizeResult qf = quantize_activations(x, full);
        const QuantizeResult qn = quantize_activations(x, naive);
        const double tensor_step = qn.stats[0].delta;
        if (qf.shared_step != tensor_step) ++bad;
        const double qmax = static_cast<double>(full.act_qmax());
        for (const GroupStats& s : qf.stats) {
            if (!(s.delta <= tensor_step)) ++bad;
            if (!(s.c_base / qmax <= tensor_step)) ++bad;
        }
        ++tensors;
    };

    const SynthResult syn = generate_synth(SynthSpec{});
    for (int g : {16, 32, 64}) check_tensor(syn.x, g);

    for (int rep = 0; rep < 200; ++rep) {
        const long tokens = 1 + static_cast<long>(rng.next_below(6));
        const long channels = 8 * (1 + static_cast<long>(rng.next_below(12)));
        std::vector<float> data(static_cast<std::size_t>(tokens * channels));
        for (float& v : data) v = static_cast<float>(rng.next_normal() * kScales[rep % 3]);
        if (rep % 4 == 0)
            data[static_cast<std::size_t>(rng.next_below(data.size()))] =
                static_cast<float>(500.0 * kScales[rep % 3]);
        const Tensor x = Tensor::from_f32({static_cast<std::size_t>(tokens),
                                           static_cast<std::size_t>(channels)}, data);
        const int g = kGroupSizes[rep % 4];
        check_tensor(x, g);
    }

    Outcome o;
    o.pass = bad == 0;
    o.detail = fmt("%ld tensors, dominance violations %ld", tensors, bad);
    return o;
}

// Criterion 8: the zero-flag defaults, both in the library config and as
// reported by the CLI.
Outcome criterion8() {
    const QuantConfig cfg;
    bool lib_ok = cfg.group_size == 32 && cfg.tau.has_value() && *cfg.tau == 1.0 &&
                  cfg.zero_ratio.has_value() && *cfg.zero_ratio == 0.2 && cfg.act_bits == 4 &&
                  cfg.weight_bits == 4 && !cfg.percentile.has_value() &&
                  cfg.mode == QuantMode::per_token_group;

    const fs::path d = scratch_dir();
    const fs::path xp = d / "defaults_in.npy";
    const fs::path sp = d / "defaults_stats.json";
    bool cli_ok = run_cli("gen-synth --tokens 4 --channels 32 --out " + xp.string()) == 0 &&
                  run_cli("quantize " + xp.string() + " --stats " + sp.string()) == 0;
    std::string cli_detail = "cli not run";
    if (cli_ok) {
        try {
            const nlohmann::json j = nlohmann::json::parse(slurp(sp));
            const auto& c = j.at("config");
            cli_ok = c.at("act_group_size").get<int>() == 32 &&
                     c.at("step_over_std").get<double>() == 1.0 &&
                     c.at("token_zero_ratio").get<double>() == 0.2 &&
                     c.at("act_bits").get<int>() == 4 && c.at("weight_bits").get<int>() == 4 &&
                     c.at("variant") == "full" && c.at("mode") == "per_token_group";
            cli_detail = cli_ok ? "cli snapshot ok" : "cli snapshot differs";
        } catch (const std::exception& e) {
            cli_ok = false;
            cli_detail = std::string("stats parse failed: ") + e.what();
        }
    }

    Outcome o;
    o.pass = lib_ok && cli_ok;
    o.detail = fmt("library defaults %s; %s", lib_ok ? "ok" : "WRONG", cli_detail.c_str());
    return o;
}

} // namespace

int main(int argc, char** argv) {
    struct Row {
        int id;
        const char* what;
        Outcome (*fn)();
    };
    const Row rows[] = {
        {1, "constraint guarantees on random groups", criterion1},
        {2, "synthetic default: residual dispersion violations", criterion2},
        {3, "rounding error bounds", criterion3},
        {4, "boundary token flush and recovery", criterion4},
        {5, "selection, morphology and linear references", criterion5},
        {6, "lossless packing and byte-stable outputs", criterion6},
        {7, "group steps never exceed the tensor step", criterion7},
        {8, "zero-flag defaults", criterion8},
    };

    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
    if (selected.empty())
        for (const Row& r : rows) selected.push_back(r.id);

    bool all_pass = true;
    for (int id : selected) {
        const Row* row = nullptr;
        for (const Row& r : rows)
            if (r.id == id) row = &r;
        if (!row) {
            std::fprintf(stderr, "unknown criterion %d\n", id);
            return 2;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = row->fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] criterion %d: %s; %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", row->id,
                    row->what, o.detail.c_str(), secs);
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
