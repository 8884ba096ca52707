#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "tgq/tensor.hpp"

namespace tgq {

// Static symmetric per-output-channel weight quantization.
// s_o = max(rowmax / qmax, 1e-8); q = clip(round_half_even(W/s), qmin, qmax).
// The weight path never pre-clips: the row max always maps inside the grid.

struct QuantizedWeights {
    long out_features = 0;
    long in_features = 0;
    int bits = 4;
    std::vector<float> scales;      // one per output row
    std::vector<std::int8_t> q;     // row-major, out_features * in_features
};

QuantizedWeights quantize_weights(const Tensor& w, int bits, double eps_scale = 1e-8);

// Dequantized row-major (O, I) tensor of 32-bit reals: s_o * q.
Tensor dequantize_weights(const QuantizedWeights& qw);

// Dense nibble packing for 4-bit codes. Within each byte the even column
// sits in the low nibble, the odd column in the high nibble (two's
// complement). Rows are packed independently; odd row length leaves the
// final high nibble zero. Row stride is ceil(I/2) bytes.
std::vector<std::uint8_t> pack_int4(std::span<const std::int8_t> q, long rows, long cols);
std::vector<std::int8_t> unpack_int4(std::span<const std::uint8_t> packed, long rows, long cols);

// Container with magic "TGQW": version byte, O and I as little-endian u32,
// bits as u8, f32 scales, then the packed payload.
void write_weights(const QuantizedWeights& qw, const std::filesystem::path& path);
void write_weights(const QuantizedWeights& qw, std::ostream& out);
QuantizedWeights read_weights(const std::filesystem::path& path);
QuantizedWeights read_weights(std::istream& in, const std::string& origin = "<stream>");

} // namespace tgq
