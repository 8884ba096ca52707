#pragma once

#include <optional>

#include "tgq/quant.hpp"
#include "tgq/tensor.hpp"
#include "tgq/weights.hpp"

namespace tgq {

// One quantized affine layer: activations pass through the range-projected
// quantizer (online) or a frozen range table (fixed), weights are static
// low-bit codes, and the product accumulates in 64-bit.

enum class RadiiMode { online, fixed };

struct QuantLinear {
    QuantizedWeights weights;
    std::optional<std::vector<float>> bias; // length out_features
    QuantConfig cfg;
    RadiiMode radii_mode = RadiiMode::online;
    FrozenRadii frozen; // consulted only in fixed mode
};

// x has shape (..., in_features); the result replaces the last axis with
// out_features. Leading axes are flattened into tokens internally.
Tensor quant_linear_forward(const Tensor& x, const QuantLinear& layer);

// (B, C, H, W) feature map to (B, H*W, C) token layout and back.
Tensor tokenize_4d(const Tensor& x);
Tensor detokenize_4d(const Tensor& tokens, std::size_t height, std::size_t width);

} // namespace tgq
