#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tgq/tensor.hpp"

// Symmetric uniform quantization with per-token channel groups and a
// dual-constraint projection of each group's clip radius:
//
//   C1 (step-to-dispersion): delta_k <= tau * sigma_k
//   C2 (zero-bin mass):      delta_k / 2 <= Q_zr(|x_k|)
//
// The final radius is max(min(c_base, c_tau, c_zr), eps_scale). The final
// step is taken as the min of the candidate steps directly, so that both
// constraint inequalities hold exactly in floating point, not merely up to
// a radius->step->radius rounding trip.

namespace tgq {

enum class QuantMode { per_tensor, per_channel, per_token_group };

struct QuantConfig {
    int act_bits = 4;
    int weight_bits = 4;
    int group_size = 32;                  // channels per token group
    std::optional<double> tau = 1.0;      // C1 bound; absent disables C1
    std::optional<double> zero_ratio = 0.2; // C2 quantile order; absent disables C2
    std::optional<double> percentile;     // base radius quantile; absent = max-abs
    QuantMode mode = QuantMode::per_token_group;
    double eps_scale = 1e-8;
    double eps_std = 1e-12;

    int act_qmax() const { return (1 << (act_bits - 1)) - 1; }
    int act_qmin() const { return -(1 << (act_bits - 1)); }
    int weight_qmax() const { return (1 << (weight_bits - 1)) - 1; }
    int weight_qmin() const { return -(1 << (weight_bits - 1)); }

    void validate() const;
};

// Ablation surface: which range mechanisms are active. Bit widths and the
// numeric parameter values always come from the config itself.
enum class Variant { naive_w4a4, per_tensor, dstg_only, dcrp_only, c1_only, c2_only, full };

Variant parse_variant(const std::string& name);
const char* variant_name(Variant v);
QuantConfig variant_config(Variant v, QuantConfig base);

struct GroupStats {
    long token_index = 0;
    long group_index = 0;
    double c_base = 0.0;
    std::optional<double> c_tau;
    std::optional<double> c_zr;
    double c_final = 0.0;
    double delta = 0.0;
    double sigma = 0.0; // population std of the group, before stabilization
    double eta = 0.0;   // delta / (sigma + eps_std)
    double rho0 = 0.0;  // fraction of the group quantized to the zero bin
    double rho0_shared = 0.0; // zero-bin fraction under the shared-range step
    long clipped = 0;   // elements with |x| > c_final
};

// Nearest integer, ties to even. round_half_even(2.5) = 2, (-3.5) = -4.
long long round_half_even(double x);

struct QdqResult {
    std::vector<int> q;
    std::vector<double> x_hat;
    double delta = 0.0;
};

// Symmetric quantize-dequantize of one vector against clip radius c.
// delta = max(c / qmax, eps_scale). Throws InvalidRadius unless c > 0.
QdqResult symmetric_qdq(std::span<const double> x, double c, int bits, double eps_scale = 1e-8);

// Same, with the step supplied by the caller (used after projection).
QdqResult qdq_with_step(std::span<const double> x, double c, double delta, int bits);

// Zero-padded copy of one token row, split into ceil(C/g) groups of g.
struct TokenGroups {
    std::vector<double> padded; // length groups * group_size
    long groups = 0;
    long pad = 0; // trailing zeros appended
};
TokenGroups partition_token(std::span<const float> token, int group_size);

// Base clip radius: max-abs, or the ceil(p*g)-th smallest magnitude when a
// percentile is given. Ascending selection; |group| >= 1 required.
double base_radius(std::span<const double> group, std::optional<double> percentile);

// Population standard deviation (divide by n) plus eps_std.
double group_std(std::span<const double> group, double eps_std = 1e-12);

// 1-indexed selection rank ceil(p*n), clamped to [1, n].
long quantile_rank(double p, long n);

// k-th smallest magnitude of the group, k = quantile_rank(p, n).
double magnitude_quantile(std::span<const double> group, double p);

struct Projection {
    double c_base = 0.0;
    std::optional<double> c_tau;
    std::optional<double> c_zr;
    double c_final = 0.0;
    double delta = 0.0;
    double sigma = 0.0; // raw population std
};

// Dual-constraint projection of one group's radius.
Projection project_group_radius(double c_base, std::span<const double> group, const QuantConfig& cfg);

struct QuantizeResult {
    Tensor x_hat;                  // same shape as the input
    std::vector<GroupStats> stats; // token-major, then group
    long tokens = 0;
    long channels = 0;
    long groups_per_token = 0;     // 1 for per_tensor; channels for per_channel
    long pad = 0;                  // zeros appended to each token's last group
    double shared_radius = 0.0;    // max over groups of c_base
    double shared_step = 0.0;      // max(shared_radius / qmax, eps_scale)
};

// Quantize-dequantize a (..., C) activation tensor. Leading axes are
// treated as tokens. Rejects non-finite input.
QuantizeResult quantize_activations(const Tensor& x, const QuantConfig& cfg);

// Frozen ranges for re-applying a previously derived quantizer.
struct FrozenRadii {
    QuantMode mode = QuantMode::per_tensor;
    int group_size = 32;
    std::vector<double> radius; // per_tensor: 1 entry; per_token_group: one per group
    std::vector<double> step;   // empty: derive max(radius/qmax, eps_scale)
};

Tensor apply_frozen_radii(const Tensor& x, const FrozenRadii& radii, const QuantConfig& cfg);

} // namespace tgq
