#include "tgq/layer.hpp"

#include "tgq/errors.hpp"

namespace tgq {

Tensor quant_linear_forward(const Tensor& x, const QuantLinear& layer) {
    if (x.dtype() != DType::f32)
        throw ShapeError("quant_linear_forward: input must hold 32-bit reals");
    if (x.ndim() < 1)
        throw ShapeError("quant_linear_forward: input must have at least one axis");
    const long in_f = static_cast<long>(x.shape().back());
    if (in_f != layer.weights.in_features)
        throw ShapeError("quant_linear_forward: last axis " + std::to_string(in_f) +
                         " does not match weight in_features " +
                         std::to_string(layer.weights.in_features));
    if (layer.bias && static_cast<long>(layer.bias->size()) != layer.weights.out_features)
        throw ShapeError("quant_linear_forward: bias length does not match out_features");

    Tensor x_hat = layer.radii_mode == RadiiMode::online
                       ? quantize_activations(x, layer.cfg).x_hat
                       : apply_frozen_radii(x, layer.frozen, layer.cfg);
    const Tensor w_hat = dequantize_weights(layer.weights);

    const long out_f = layer.weights.out_features;
    const long tokens = static_cast<long>(x.size()) / in_f;

    std::vector<std::size_t> out_shape(x.shape().begin(), x.shape().end());
    out_shape.back() = static_cast<std::size_t>(out_f);
    Tensor y = Tensor::zeros(out_shape, DType::f32);

    auto a = x_hat.f32();
    auto w = w_hat.f32();
    auto out = y.f32();
    for (long t = 0; t < tokens; ++t) {
        for (long o = 0; o < out_f; ++o) {
            double acc = 0.0;
            const std::size_t arow = static_cast<std::size_t>(t * in_f);
            const std::size_t wrow = static_cast<std::size_t>(o * in_f);
            for (long i = 0; i < in_f; ++i)
                acc += static_cast<double>(a[arow + static_cast<std::size_t>(i)]) *
                       static_cast<double>(w[wrow + static_cast<std::size_t>(i)]);
            if (layer.bias)
                acc += static_cast<double>((*layer.bias)[static_cast<std::size_t>(o)]);
            out[static_cast<std::size_t>(t * out_f + o)] = static_cast<float>(acc);
        }
    }
    return y;
}

Tensor tokenize_4d(const Tensor& x) {
    if (x.dtype() != DType::f32 || x.ndim() != 4)
        throw ShapeError("tokenize_4d: expected a 4-d (B, C, H, W) tensor of reals");
    const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor t = Tensor::zeros({b, h * w, c});
    auto in = x.f32();
    auto out = t.f32();
    for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t hi = 0; hi < h; ++hi)
                for (std::size_t wi = 0; wi < w; ++wi)
                    out[(bi * h * w + hi * w + wi) * c + ci] =
                        in[((bi * c + ci) * h + hi) * w + wi];
    return t;
}

Tensor detokenize_4d(const Tensor& tokens, std::size_t height, std::size_t width) {
    if (tokens.dtype() != DType::f32 || tokens.ndim() != 3)
        throw ShapeError("detokenize_4d: expected a 3-d (B, T, C) tensor of reals");
    const std::size_t b = tokens.dim(0), t = tokens.dim(1), c = tokens.dim(2);
    if (t != height * width)
        throw ShapeError("detokenize_4d: token count does not equal height*width");
    Tensor x = Tensor::zeros({b, c, height, width});
    auto in = tokens.f32();
    auto out = x.f32();
    for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t hi = 0; hi < height; ++hi)
                for (std::size_t wi = 0; wi < width; ++wi)
                    out[((bi * c + ci) * height + hi) * width + wi] =
                        in[(bi * height * width + hi * width + wi) * c + ci];
    return x;
}

} // namespace tgq
