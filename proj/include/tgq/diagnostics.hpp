#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tgq/quant.hpp"
#include "tgq/tensor.hpp"

namespace tgq {

// Scalar diagnostics ------------------------------------------------------

// Clip radius over tensor dispersion: c / (population_std(x) + eps_std).
double global_clip_factor(const Tensor& x, double c, double eps_std = 1e-12);

// Fraction of values with |v| <= delta/2 (inclusive).
double zero_bin_mass(std::span<const float> values, double delta);

// max|x| over the median across tokens of the median magnitude across
// channels. Lower-median convention (rank ceil(n/2)); denominator floored
// at eps_std, so an all-zero tensor maps to 0.
double range_disparity(const Tensor& x, double eps_std = 1e-12);

// Boundary protocol -------------------------------------------------------

struct BoundaryProtocol {
    int r_in = 1;       // erosion radius
    int r_out = 2;      // dilation radius
    double gamma_bdry = 0.5;
    double gamma_nonbdry = 0.0;
};

enum class TokenClass { boundary_heavy, non_boundary, excluded };

const char* token_class_name(TokenClass c);

// Dilate(mask, r_out) minus Erode(mask, r_in) on a binary (H, W) byte mask.
// Square structuring element of radius r; outside the grid counts as 0.
Tensor boundary_band(const Tensor& mask, int r_in, int r_out);

// Mean band value over each (H/grid_h, W/grid_w) patch, row-major tokens.
std::vector<double> token_occupancy(const Tensor& band, std::size_t grid_h, std::size_t grid_w);

// occupancy >= gamma_bdry: boundary_heavy; <= gamma_nonbdry: non_boundary;
// anything between is excluded from both pools.
std::vector<TokenClass> classify_tokens(std::span<const double> occupancy, const BoundaryProtocol& bp);

// Report ------------------------------------------------------------------

struct SummaryStats {
    double mean = 0.0;
    double p50 = 0.0;
    double p95 = 0.0;
    double max = 0.0;
    long count = 0;
};

struct DiagnosticsReport {
    double c_g = 0.0;             // shared-range clip factor of the input
    double range_disparity = 0.0;
    double delta_tensor = 0.0;    // shared-range step
    SummaryStats delta;           // projected per-group steps
    std::map<std::string, SummaryStats> eta;  // by token class
    std::map<std::string, SummaryStats> rho0; // by token class
    std::map<std::string, double> rho0_elements; // pooled per class
    std::optional<double> c1_violation_pre;
    std::optional<double> c1_violation_post;
    std::optional<double> c2_violation_pre;
    std::optional<double> c2_violation_post;
    std::map<std::string, long> group_counts;
    std::map<std::string, long> token_counts;
};

// Aggregates group statistics against token labels. labels may be empty
// (every token falls into class "all") and otherwise must have one entry
// per token. Pre-projection violations are judged with the shared-range
// step of the same input; post-projection with each group's final step.
DiagnosticsReport build_report(const QuantizeResult& qr, std::span<const TokenClass> labels,
                               const Tensor& x, const QuantConfig& cfg);

// Serialization. JSON numbers carry 9 significant digits; the CSV is one
// header line plus one row with the same values, in a fixed column order.
std::string report_to_json(const DiagnosticsReport& r, int indent = 2);
std::string report_csv_header(const DiagnosticsReport& r);
std::string report_csv_row(const DiagnosticsReport& r);

// Percentile summary of a value list (ascending selection, rank ceil(p*n)).
SummaryStats summarize(std::span<const double> values);

} // namespace tgq
