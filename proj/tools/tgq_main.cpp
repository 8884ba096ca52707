// Command-line front end: synthetic data generation, activation QDQ with
// per-group range projection, weight packing, simulated linear layers,
// diagnostics reports, and hyperparameter sweeps. Every command is
// deterministic: the same inputs and flags produce byte-identical outputs.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tgq/calibration.hpp"
#include "tgq/diagnostics.hpp"
#include "tgq/errors.hpp"
#include "tgq/layer.hpp"
#include "tgq/npy.hpp"
#include "tgq/numfmt.hpp"
#include "tgq/quant.hpp"
#include "tgq/synth.hpp"
#include "tgq/tensor.hpp"
#include "tgq/weights.hpp"

namespace {

using namespace tgq;
using nlohmann::json;

const char* mode_name(QuantMode m) {
    switch (m) {
        case QuantMode::per_tensor: return "per_tensor";
        case QuantMode::per_channel: return "per_channel";
        case QuantMode::per_token_group: return "per_token_group";
    }
    return "per_token_group";
}

QuantMode parse_mode(const std::string& name) {
    if (name == "per_tensor") return QuantMode::per_tensor;
    if (name == "per_channel") return QuantMode::per_channel;
    if (name == "per_token_group") return QuantMode::per_token_group;
    throw ConfigError("unknown mode '" + name +
                      "' (expected per_tensor, per_channel, per_token_group)");
}

void write_text(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write to '" + path + "' failed");
}

void write_tensor(const Tensor& t, const std::string& path) {
    if (path == "-") {
        write_npy(t, std::cout);
        std::cout.flush();
        return;
    }
    write_npy(t, std::filesystem::path(path));
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    return j;
}

// Quantizer flags shared by the quantize/diagnose/sweep/linear/calibrate
// commands. A JSON config file may supply any of these; explicit flags win.
struct QuantFlags {
    std::string variant = "full";
    std::string mode;
    int act_bits = 4;
    int weight_bits = 4;
    int bits = 4;
    int group_size = 32;
    double tau = 1.0;
    double zero_ratio = 0.2;
    double percentile = 1.0;
    std::string config_path;

    CLI::Option* o_variant = nullptr;
    CLI::Option* o_mode = nullptr;
    CLI::Option* o_act_bits = nullptr;
    CLI::Option* o_weight_bits = nullptr;
    CLI::Option* o_bits = nullptr;
    CLI::Option* o_group = nullptr;
    CLI::Option* o_tau = nullptr;
    CLI::Option* o_zr = nullptr;
    CLI::Option* o_pct = nullptr;

    bool tau_disabled = false; // config file set step_over_std to null
    bool zr_disabled = false;
    bool pct_present = false; // --percentile flag or config file key seen
};

void add_quant_flags(CLI::App* cmd, QuantFlags& f) {
    f.o_variant = cmd->add_option("--variant", f.variant,
                                  "naive_w4a4, per_tensor, dstg_only, dcrp_only, c1_only, "
                                  "c2_only, or full (default full)");
    f.o_mode = cmd->add_option("--mode", f.mode,
                               "override the variant's granularity: per_tensor, per_channel, "
                               "per_token_group");
    f.o_act_bits = cmd->add_option("--act_bits", f.act_bits, "activation bit width (default 4)");
    f.o_weight_bits = cmd->add_option("--weight_bits", f.weight_bits, "weight bit width (default 4)");
    f.o_bits = cmd->add_option("--bits", f.bits, "shorthand for --act_bits");
    f.o_group = cmd->add_option("--act_group_size", f.group_size,
                                "channels per token group (default 32)");
    f.o_tau = cmd->add_option("--step_over_std", f.tau,
                              "dispersion constraint bound tau (default 1.0)");
    f.o_zr = cmd->add_option("--token_zero_ratio", f.zero_ratio,
                             "zero-bin occupancy target zr (default 0.2)");
    f.o_pct = cmd->add_option("--percentile", f.percentile,
                              "base radius quantile in (0, 1]; omitted = max-abs");
    cmd->add_option("--config", f.config_path,
                    "JSON file with the same keys as the stats config block; explicit flags win");
}

// Fold the config file into flags that were not given on the command line.
void apply_config_file(QuantFlags& f) {
    if (f.config_path.empty()) return;
    const json j = load_json_file(f.config_path);
    if (!j.is_object()) throw ParseError("'" + f.config_path + "': expected a JSON object");

    auto unset = [](CLI::Option* o) { return o == nullptr || o->count() == 0; };
    auto get_int = [&](const char* key, CLI::Option* o, int& dst) {
        if (unset(o) && j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<int>();
    };
    auto get_str = [&](const char* key, CLI::Option* o, std::string& dst) {
        if (unset(o) && j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<std::string>();
    };

    get_str("variant", f.o_variant, f.variant);
    get_str("mode", f.o_mode, f.mode);
    get_int("act_bits", f.o_act_bits, f.act_bits);
    get_int("weight_bits", f.o_weight_bits, f.weight_bits);
    get_int("act_group_size", f.o_group, f.group_size);

    if (f.o_tau->count() == 0 && j.contains("step_over_std")) {
        if (j.at("step_over_std").is_null())
            f.tau_disabled = true;
        else
            f.tau = j.at("step_over_std").get<double>();
    }
    if (f.o_zr->count() == 0 && j.contains("token_zero_ratio")) {
        if (j.at("token_zero_ratio").is_null())
            f.zr_disabled = true;
        else
            f.zero_ratio = j.at("token_zero_ratio").get<double>();
    }
    if (f.o_pct->count() == 0 && j.contains("percentile") && !j.at("percentile").is_null()) {
        f.percentile = j.at("percentile").get<double>();
        f.pct_present = true;
    }
}

struct BuiltConfig {
    QuantConfig cfg;
    Variant variant = Variant::full;
};

BuiltConfig build_config(QuantFlags& f) {
    apply_config_file(f);
    if (f.o_pct && f.o_pct->count() > 0) f.pct_present = true;

    QuantConfig base;
    base.act_bits = f.act_bits;
    if (f.o_act_bits && f.o_act_bits->count() == 0 && f.o_bits && f.o_bits->count() > 0)
        base.act_bits = f.bits;
    base.weight_bits = f.weight_bits;
    base.group_size = f.group_size;
    base.tau = f.tau_disabled ? std::optional<double>{} : std::optional<double>{f.tau};
    base.zero_ratio = f.zr_disabled ? std::optional<double>{} : std::optional<double>{f.zero_ratio};
    if (f.pct_present) base.percentile = f.percentile;

    BuiltConfig out;
    out.variant = parse_variant(f.variant);
    out.cfg = variant_config(out.variant, base);
    if (!f.mode.empty()) out.cfg.mode = parse_mode(f.mode);
    out.cfg.validate();
    return out;
}

json config_snapshot(const QuantConfig& cfg, Variant v) {
    json j;
    j["variant"] = variant_name(v);
    j["mode"] = mode_name(cfg.mode);
    j["act_bits"] = cfg.act_bits;
    j["weight_bits"] = cfg.weight_bits;
    j["act_group_size"] = cfg.group_size;
    j["step_over_std"] = cfg.tau ? json(round_g9(*cfg.tau)) : json();
    j["token_zero_ratio"] = cfg.zero_ratio ? json(round_g9(*cfg.zero_ratio)) : json();
    j["percentile"] = cfg.percentile ? json(round_g9(*cfg.percentile)) : json();
    j["eps_scale"] = round_g9(cfg.eps_scale);
    j["eps_std"] = round_g9(cfg.eps_std);
    return j;
}

json group_stats_json(const GroupStats& s) {
    json j;
    j["token"] = s.token_index;
    j["group"] = s.group_index;
    j["c_base"] = round_g9(s.c_base);
    j["c_tau"] = s.c_tau ? json(round_g9(*s.c_tau)) : json();
    j["c_zr"] = s.c_zr ? json(round_g9(*s.c_zr)) : json();
    j["c_final"] = round_g9(s.c_final);
    j["delta"] = round_g9(s.delta);
    j["sigma"] = round_g9(s.sigma);
    j["eta"] = round_g9(s.eta);
    j["rho0"] = round_g9(s.rho0);
    j["rho0_shared"] = round_g9(s.rho0_shared);
    j["clipped"] = s.clipped;
    return j;
}

std::string stats_to_json(const QuantizeResult& qr, const QuantConfig& cfg, Variant v) {
    json j;
    j["config"] = config_snapshot(cfg, v);
    j["tensor"]["tokens"] = qr.tokens;
    j["tensor"]["channels"] = qr.channels;
    j["tensor"]["groups_per_token"] = qr.groups_per_token;
    j["tensor"]["pad"] = qr.pad;
    j["tensor"]["shared_radius"] = round_g9(qr.shared_radius);
    j["tensor"]["shared_step"] = round_g9(qr.shared_step);
    j["groups"] = json::array();
    for (const GroupStats& s : qr.stats) j["groups"].push_back(group_stats_json(s));
    return j.dump(2) + "\n";
}

std::vector<TokenClass> labels_from_sidecar(const std::string& path, long tokens) {
    const json j = load_json_file(path);
    if (!j.is_object() || !j.contains("n_tokens") || !j.contains("boundary_tokens"))
        throw ParseError("'" + path + "': expected {n_tokens, boundary_tokens}");
    const long n = j.at("n_tokens").get<long>();
    if (n != tokens)
        throw ShapeError("labels file covers " + std::to_string(n) + " tokens, tensor has " +
                         std::to_string(tokens));
    std::vector<TokenClass> labels(static_cast<std::size_t>(tokens), TokenClass::non_boundary);
    for (const auto& v : j.at("boundary_tokens")) {
        const long idx = v.get<long>();
        if (idx < 0 || idx >= tokens)
            throw ShapeError("'" + path + "': boundary token index " + std::to_string(idx) +
                             " out of range");
        labels[static_cast<std::size_t>(idx)] = TokenClass::boundary_heavy;
    }
    return labels;
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text) {
    const std::size_t x = text.find('x');
    if (x == std::string::npos || x == 0 || x + 1 >= text.size())
        throw ConfigError("grid must look like HxW, got '" + text + "'");
    try {
        const unsigned long h = std::stoul(text.substr(0, x));
        const unsigned long w = std::stoul(text.substr(x + 1));
        if (h == 0 || w == 0) throw ConfigError("grid extents must be positive");
        return {h, w};
    } catch (const std::invalid_argument&) {
        throw ConfigError("grid must look like HxW, got '" + text + "'");
    } catch (const std::out_of_range&) {
        throw ConfigError("grid extents out of range in '" + text + "'");
    }
}

// gen-synth ---------------------------------------------------------------

struct GenSynthArgs {
    SynthSpec spec;
    std::string out = "-";
    std::string labels_path;
};

int cmd_gen_synth(const GenSynthArgs& a) {
    const SynthResult r = generate_synth(a.spec);
    write_tensor(r.x, a.out);
    if (!a.labels_path.empty()) {
        json j;
        j["n_tokens"] = a.spec.tokens;
        j["boundary_tokens"] = json::array();
        for (long t = 0; t < a.spec.tokens; ++t)
            if (r.is_boundary[static_cast<std::size_t>(t)]) j["boundary_tokens"].push_back(t);
        write_text(a.labels_path, j.dump(2) + "\n");
    }
    return 0;
}

// quantize ----------------------------------------------------------------

struct QuantizeArgs {
    std::string input;
    std::string output;
    std::string stats;
    QuantFlags flags;
};

int cmd_quantize(QuantizeArgs& a) {
    BuiltConfig bc = build_config(a.flags);
    const Tensor x = read_npy(a.input);
    const QuantizeResult qr = quantize_activations(x, bc.cfg);
    if (!a.output.empty()) write_tensor(qr.x_hat, a.output);
    std::string stats = a.stats;
    if (stats.empty() && a.output.empty()) stats = "-";
    if (!stats.empty()) write_text(stats, stats_to_json(qr, bc.cfg, bc.variant));
    return 0;
}

// diagnose ----------------------------------------------------------------

struct DiagnoseArgs {
    std::string input;
    std::string labels_path;
    std::string mask_path;
    std::string grid;
    std::string report = "-";
    std::string csv;
    BoundaryProtocol bp;
    QuantFlags flags;
};

int cmd_diagnose(DiagnoseArgs& a) {
    BuiltConfig bc = build_config(a.flags);
    const Tensor x = read_npy(a.input);
    const QuantizeResult qr = quantize_activations(x, bc.cfg);

    std::vector<TokenClass> labels;
    if (!a.labels_path.empty() && !a.mask_path.empty())
        throw ConfigError("pass either --labels or --mask, not both");
    if (!a.labels_path.empty()) {
        labels = labels_from_sidecar(a.labels_path, qr.tokens);
    } else if (!a.mask_path.empty()) {
        if (a.grid.empty()) throw ConfigError("--mask requires --grid HxW");
        const auto [gh, gw] = parse_grid(a.grid);
        const Tensor mask = read_npy(a.mask_path);
        const Tensor band = boundary_band(mask, a.bp.r_in, a.bp.r_out);
        const std::vector<double> occ = token_occupancy(band, gh, gw);
        labels = classify_tokens(occ, a.bp);
    }

    const DiagnosticsReport rep = build_report(qr, labels, x, bc.cfg);
    if (!a.report.empty()) write_text(a.report, report_to_json(rep));
    if (!a.csv.empty()) write_text(a.csv, report_csv_header(rep) + report_csv_row(rep));
    return 0;
}

// sweep -------------------------------------------------------------------

struct SweepArgs {
    std::string input;
    std::string param;
    std::vector<double> values;
    std::string csv = "-";
    QuantFlags flags;
};

int cmd_sweep(SweepArgs& a) {
    if (a.values.empty()) throw ConfigError("sweep needs at least one value");
    if (a.param != "g" && a.param != "tau" && a.param != "zr")
        throw ConfigError("sweep param must be g, tau, or zr");
    const Tensor x = read_npy(a.input);
    const BuiltConfig base = build_config(a.flags);

    std::string out;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double value = a.values[i];
        QuantConfig cfg = base.cfg;
        if (a.param == "g") {
            const int g = static_cast<int>(value);
            if (static_cast<double>(g) != value)
                throw ConfigError("sweep over g needs integer values");
            cfg.group_size = g;
        } else if (a.param == "tau") {
            cfg.tau = value;
        } else {
            cfg.zero_ratio = value;
        }
        cfg.validate();

        const QuantizeResult qr = quantize_activations(x, cfg);
        const DiagnosticsReport rep = build_report(qr, {}, x, cfg);
        if (i == 0) out += "param,value," + report_csv_header(rep);
        out += a.param + "," + format_g9(value) + "," + report_csv_row(rep);
    }
    write_text(a.csv, out);
    return 0;
}

// pack-weights ------------------------------------------------------------

struct PackArgs {
    std::string input;
    std::string out;
    std::string dequantized;
    int weight_bits = 4;
};

int cmd_pack_weights(const PackArgs& a) {
    const Tensor w = read_npy(a.input);
    const QuantizedWeights qw = quantize_weights(w, a.weight_bits);
    if (a.out == "-") {
        write_weights(qw, std::cout);
        std::cout.flush();
    } else {
        write_weights(qw, std::filesystem::path(a.out));
    }
    if (!a.dequantized.empty()) write_tensor(dequantize_weights(qw), a.dequantized);
    return 0;
}

// linear ------------------------------------------------------------------

struct LinearArgs {
    std::string input;
    std::string weights;
    std::string bias;
    std::string output = "-";
    std::string radius_table;
    std::string layer_name = "layer";
    QuantFlags flags;
};

int cmd_linear(LinearArgs& a) {
    BuiltConfig bc = build_config(a.flags);

    QuantLinear layer;
    layer.weights = read_weights(std::filesystem::path(a.weights));
    layer.cfg = bc.cfg;
    if (!a.bias.empty()) {
        const Tensor b = read_npy(a.bias);
        if (b.dtype() != DType::f32 || b.ndim() != 1)
            throw ShapeError("bias must be a 1-d tensor of reals");
        layer.bias = std::vector<float>(b.f32().begin(), b.f32().end());
    }
    if (!a.radius_table.empty()) {
        const auto radii = read_radius_table(a.radius_table);
        layer.frozen = frozen_from_table(radii, a.layer_name, bc.cfg);
        layer.radii_mode = RadiiMode::fixed;
    }

    const Tensor x = read_npy(a.input);
    write_tensor(quant_linear_forward(x, layer), a.output);
    return 0;
}

// calibrate ---------------------------------------------------------------

struct CalibrateArgs {
    std::vector<std::string> inputs;
    std::string layer_name = "layer";
    std::string out = "-";
    QuantFlags flags;
};

int cmd_calibrate(CalibrateArgs& a) {
    BuiltConfig bc = build_config(a.flags);
    std::vector<Tensor> samples;
    samples.reserve(a.inputs.size());
    for (const std::string& p : a.inputs) samples.push_back(read_npy(p));
    const RadiusTable table = calibrate_fixed_radii(a.layer_name, samples, a.inputs, bc.cfg);
    write_text(a.out, radius_table_to_json(table));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"token-group activation quantization toolkit"};
    app.require_subcommand(1);

    GenSynthArgs gen;
    CLI::App* c_gen = app.add_subcommand("gen-synth",
                                         "generate a two-population synthetic activation tensor");
    c_gen->add_option("--tokens", gen.spec.tokens, "token count (default 128)");
    c_gen->add_option("--channels", gen.spec.channels, "channel count (default 64)");
    c_gen->add_option("--boundary_frac", gen.spec.boundary_frac,
                      "fraction of boundary tokens (default 0.25)");
    c_gen->add_option("--cue_scale", gen.spec.cue_scale, "boundary response std (default 0.1)");
    c_gen->add_option("--background_scale", gen.spec.background_scale,
                      "background std (default 1.0)");
    c_gen->add_option("--spike_magnitude", gen.spec.spike_magnitude,
                      "spike size in background-scale units (default 50)");
    c_gen->add_option("--spike_prob", gen.spec.spike_prob,
                      "per-background-token spike probability (default 0.05)");
    c_gen->add_flag("--signed_spikes", gen.spec.signed_spikes, "draw spike signs at random");
    c_gen->add_option("--seed", gen.spec.seed, "PRNG seed (default 42)");
    c_gen->add_option("--out", gen.out, "output NPY path, - for stdout (default -)");
    c_gen->add_option("--labels", gen.labels_path, "token label sidecar JSON path");

    QuantizeArgs qa;
    CLI::App* c_quant = app.add_subcommand("quantize", "quantize-dequantize an activation tensor");
    c_quant->add_option("input", qa.input, "input NPY tensor")->required();
    c_quant->add_option("--output", qa.output, "write the dequantized tensor to this NPY path");
    c_quant->add_option("--stats", qa.stats,
                        "write per-group statistics JSON here (defaults to - when no --output)");
    add_quant_flags(c_quant, qa.flags);

    DiagnoseArgs da;
    CLI::App* c_diag = app.add_subcommand("diagnose", "quantize and report mechanism diagnostics");
    c_diag->add_option("input", da.input, "input NPY tensor")->required();
    c_diag->add_option("--labels", da.labels_path, "token label sidecar from gen-synth");
    c_diag->add_option("--mask", da.mask_path, "binary mask NPY for the boundary protocol");
    c_diag->add_option("--grid", da.grid, "token grid HxW for --mask");
    c_diag->add_option("--r_in", da.bp.r_in, "erosion radius (default 1)");
    c_diag->add_option("--r_out", da.bp.r_out, "dilation radius (default 2)");
    c_diag->add_option("--gamma_bdry", da.bp.gamma_bdry,
                       "boundary-heavy occupancy threshold (default 0.5)");
    c_diag->add_option("--gamma_nonbdry", da.bp.gamma_nonbdry,
                       "non-boundary occupancy threshold (default 0.0)");
    c_diag->add_option("--report", da.report, "report JSON path, - for stdout (default -)");
    c_diag->add_option("--csv", da.csv, "also write the report as CSV here");
    add_quant_flags(c_diag, da.flags);

    SweepArgs sa;
    CLI::App* c_sweep = app.add_subcommand("sweep", "diagnose across one hyperparameter");
    c_sweep->add_option("input", sa.input, "input NPY tensor")->required();
    c_sweep->add_option("--param", sa.param, "g, tau, or zr")->required();
    c_sweep->add_option("--values", sa.values, "values to sweep")->required()->delimiter(',');
    c_sweep->add_option("--csv", sa.csv, "output CSV path, - for stdout (default -)");
    add_quant_flags(c_sweep, sa.flags);

    PackArgs pa;
    CLI::App* c_pack = app.add_subcommand("pack-weights", "quantize and pack a weight matrix");
    c_pack->add_option("input", pa.input, "weight NPY tensor (out_features, in_features)")
        ->required();
    c_pack->add_option("--out", pa.out, "packed container path, - for stdout")->required();
    c_pack->add_option("--weight_bits", pa.weight_bits, "weight bit width (default 4)");
    c_pack->add_option("--dequantized", pa.dequantized, "also write s*q as NPY here");

    LinearArgs la;
    CLI::App* c_lin = app.add_subcommand("linear", "run a simulated quantized linear layer");
    c_lin->add_option("input", la.input, "activation NPY tensor (..., in_features)")->required();
    c_lin->add_option("weights", la.weights, "packed weight container")->required();
    c_lin->add_option("--bias", la.bias, "bias NPY vector");
    c_lin->add_option("--output", la.output, "output NPY path, - for stdout (default -)");
    c_lin->add_option("--radius_table", la.radius_table,
                      "frozen radius table JSON; switches activations to fixed ranges");
    c_lin->add_option("--layer", la.layer_name, "layer name inside the radius table");
    add_quant_flags(c_lin, la.flags);

    CalibrateArgs ca;
    CLI::App* c_cal = app.add_subcommand("calibrate", "derive a frozen per-tensor radius table");
    c_cal->add_option("inputs", ca.inputs, "calibration NPY tensors")->required();
    c_cal->add_option("--layer", ca.layer_name, "layer name for the table (default 'layer')");
    c_cal->add_option("--out", ca.out, "radius table JSON path, - for stdout (default -)");
    add_quant_flags(c_cal, ca.flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (app.got_subcommand(c_gen)) return cmd_gen_synth(gen);
        if (app.got_subcommand(c_quant)) return cmd_quantize(qa);
        if (app.got_subcommand(c_diag)) return cmd_diagnose(da);
        if (app.got_subcommand(c_sweep)) return cmd_sweep(sa);
        if (app.got_subcommand(c_pack)) return cmd_pack_weights(pa);
        if (app.got_subcommand(c_lin)) return cmd_linear(la);
        if (app.got_subcommand(c_cal)) return cmd_calibrate(ca);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
