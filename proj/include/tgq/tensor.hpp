#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "tgq/errors.hpp"

namespace tgq {

enum class DType { f32, u8 };

// Dense row-major tensor. Two element types are enough for this library:
// 32-bit reals for data, bytes for masks.
class Tensor {
public:
    Tensor() : data_(std::vector<float>{}) {}

    static Tensor zeros(std::vector<std::size_t> shape, DType dtype = DType::f32) {
        Tensor t;
        t.shape_ = std::move(shape);
        const std::size_t n = count(t.shape_);
        if (dtype == DType::f32)
            t.data_ = std::vector<float>(n, 0.0f);
        else
            t.data_ = std::vector<std::uint8_t>(n, 0);
        return t;
    }

    static Tensor from_f32(std::vector<std::size_t> shape, std::vector<float> values) {
        if (count(shape) != values.size())
            throw ShapeError("Tensor::from_f32: value count does not match shape");
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = std::move(values);
        return t;
    }

    static Tensor from_u8(std::vector<std::size_t> shape, std::vector<std::uint8_t> values) {
        if (count(shape) != values.size())
            throw ShapeError("Tensor::from_u8: value count does not match shape");
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = std::move(values);
        return t;
    }

    DType dtype() const {
        return std::holds_alternative<std::vector<float>>(data_) ? DType::f32 : DType::u8;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t size() const { return count(shape_); }

    std::size_t dim(std::size_t i) const {
        if (i >= shape_.size()) throw ShapeError("Tensor::dim: axis out of range");
        return shape_[i];
    }

    std::span<const float> f32() const {
        if (dtype() != DType::f32) throw ShapeError("Tensor::f32: tensor holds bytes, not reals");
        return std::get<std::vector<float>>(data_);
    }
    std::span<float> f32() {
        if (dtype() != DType::f32) throw ShapeError("Tensor::f32: tensor holds bytes, not reals");
        return std::get<std::vector<float>>(data_);
    }
    std::span<const std::uint8_t> u8() const {
        if (dtype() != DType::u8) throw ShapeError("Tensor::u8: tensor holds reals, not bytes");
        return std::get<std::vector<std::uint8_t>>(data_);
    }
    std::span<std::uint8_t> u8() {
        if (dtype() != DType::u8) throw ShapeError("Tensor::u8: tensor holds reals, not bytes");
        return std::get<std::vector<std::uint8_t>>(data_);
    }

    // Row-major flat offset of a multi-index.
    std::size_t flat_index(std::span<const std::size_t> idx) const {
        if (idx.size() != shape_.size())
            throw ShapeError("Tensor::flat_index: rank mismatch");
        std::size_t off = 0;
        for (std::size_t a = 0; a < shape_.size(); ++a) {
            if (idx[a] >= shape_[a]) throw ShapeError("Tensor::flat_index: index out of range");
            off = off * shape_[a] + idx[a];
        }
        return off;
    }

    static std::vector<std::size_t> unflatten(std::size_t flat, std::span<const std::size_t> shape) {
        std::vector<std::size_t> idx(shape.size(), 0);
        for (std::size_t a = shape.size(); a-- > 0;) {
            idx[a] = flat % shape[a];
            flat /= shape[a];
        }
        return idx;
    }

    bool all_finite() const {
        if (dtype() != DType::f32) return true;
        for (float v : f32())
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

    std::vector<std::size_t> shape_;
    std::variant<std::vector<float>, std::vector<std::uint8_t>> data_;
};

} // namespace tgq
