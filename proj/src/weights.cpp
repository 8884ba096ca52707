#include "tgq/weights.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "tgq/errors.hpp"
#include "tgq/quant.hpp"

namespace tgq {
namespace {

const char kMagic[4] = {'T', 'G', 'Q', 'W'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& origin) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw IoError("read_weights: " + origin + ": truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

QuantizedWeights quantize_weights(const Tensor& w, int bits, double eps_scale) {
    if (w.dtype() != DType::f32)
        throw ShapeError("quantize_weights: weights must hold 32-bit reals");
    if (w.ndim() != 2)
        throw ShapeError("quantize_weights: weights must be a 2-d (out, in) tensor");
    if (bits < 2 || bits > 8)
        throw ConfigError("quantize_weights: bits must be in [2, 8]");
    if (!w.all_finite())
        throw NonFiniteInput("quantize_weights: weights contain NaN or Inf");

    const long out_f = static_cast<long>(w.dim(0));
    const long in_f = static_cast<long>(w.dim(1));
    const int qmax = (1 << (bits - 1)) - 1;
    const int qmin = -(1 << (bits - 1));
    auto values = w.f32();

    QuantizedWeights qw;
    qw.out_features = out_f;
    qw.in_features = in_f;
    qw.bits = bits;
    qw.scales.resize(static_cast<std::size_t>(out_f));
    qw.q.resize(static_cast<std::size_t>(out_f) * static_cast<std::size_t>(in_f));

    for (long o = 0; o < out_f; ++o) {
        double rowmax = 0.0;
        for (long i = 0; i < in_f; ++i)
            rowmax = std::max(rowmax, std::fabs(static_cast<double>(values[static_cast<std::size_t>(o * in_f + i)])));
        const double s = std::max(rowmax / static_cast<double>(qmax), eps_scale);
        qw.scales[static_cast<std::size_t>(o)] = static_cast<float>(s);
        for (long i = 0; i < in_f; ++i) {
            const double v = static_cast<double>(values[static_cast<std::size_t>(o * in_f + i)]);
            long long q = round_half_even(v / s);
            q = std::clamp<long long>(q, qmin, qmax);
            qw.q[static_cast<std::size_t>(o * in_f + i)] = static_cast<std::int8_t>(q);
        }
    }
    return qw;
}

Tensor dequantize_weights(const QuantizedWeights& qw) {
    Tensor w = Tensor::zeros({static_cast<std::size_t>(qw.out_features),
                              static_cast<std::size_t>(qw.in_features)});
    auto out = w.f32();
    for (long o = 0; o < qw.out_features; ++o) {
        const float s = qw.scales[static_cast<std::size_t>(o)];
        for (long i = 0; i < qw.in_features; ++i) {
            const std::size_t at = static_cast<std::size_t>(o * qw.in_features + i);
            out[at] = s * static_cast<float>(qw.q[at]);
        }
    }
    return w;
}

std::vector<std::uint8_t> pack_int4(std::span<const std::int8_t> q, long rows, long cols) {
    if (rows < 1 || cols < 1 || q.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
        throw ShapeError("pack_int4: code count does not match rows*cols");
    for (std::int8_t v : q)
        if (v < -8 || v > 7)
            throw RangeError("pack_int4: code outside [-8, 7]");
    const long stride = (cols + 1) / 2;
    std::vector<std::uint8_t> packed(static_cast<std::size_t>(rows) * static_cast<std::size_t>(stride), 0);
    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
            const std::uint8_t nib = static_cast<std::uint8_t>(q[static_cast<std::size_t>(r * cols + c)]) & 0x0F;
            std::uint8_t& byte = packed[static_cast<std::size_t>(r * stride + c / 2)];
            if (c % 2 == 0)
                byte = static_cast<std::uint8_t>(byte | nib);
            else
                byte = static_cast<std::uint8_t>(byte | (nib << 4));
        }
    }
    return packed;
}

std::vector<std::int8_t> unpack_int4(std::span<const std::uint8_t> packed, long rows, long cols) {
    if (rows < 1 || cols < 1)
        throw ShapeError("unpack_int4: rows and cols must be positive");
    const long stride = (cols + 1) / 2;
    if (packed.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(stride))
        throw CorruptPayload("unpack_int4: payload size does not match rows*ceil(cols/2)");
    if (cols % 2 == 1) {
        for (long r = 0; r < rows; ++r)
            if (packed[static_cast<std::size_t>(r * stride + stride - 1)] & 0xF0)
                throw CorruptPayload("unpack_int4: nonzero padding nibble");
    }
    std::vector<std::int8_t> q(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
            const std::uint8_t byte = packed[static_cast<std::size_t>(r * stride + c / 2)];
            const std::uint8_t nib = (c % 2 == 0) ? (byte & 0x0F) : (byte >> 4);
            // Shift into the sign position and back to extend two's complement.
            q[static_cast<std::size_t>(r * cols + c)] =
                static_cast<std::int8_t>(static_cast<std::int8_t>(nib << 4) >> 4);
        }
    }
    return q;
}

void write_weights(const QuantizedWeights& qw, std::ostream& out) {
    if (qw.bits != 4)
        throw UnsupportedFormat("write_weights: container stores 4-bit codes only");
    out.write(kMagic, 4);
    out.put(static_cast<char>(kVersion));
    put_u32(out, static_cast<std::uint32_t>(qw.out_features));
    put_u32(out, static_cast<std::uint32_t>(qw.in_features));
    out.put(static_cast<char>(qw.bits));
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(qw.scales.data()),
              static_cast<std::streamsize>(qw.scales.size() * sizeof(float)));
    const std::vector<std::uint8_t> packed = pack_int4(qw.q, qw.out_features, qw.in_features);
    out.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (!out)
        throw IoError("write_weights: stream write failed");
}

void write_weights(const QuantizedWeights& qw, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("write_weights: cannot open '" + path.string() + "'");
    write_weights(qw, out);
    out.flush();
    if (!out)
        throw IoError("write_weights: write to '" + path.string() + "' failed");
}

QuantizedWeights read_weights(std::istream& in, const std::string& origin) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError("read_weights: " + origin + ": not a TGQW file");
    const int version = in.get();
    if (version == EOF)
        throw IoError("read_weights: " + origin + ": truncated header");
    if (version != kVersion)
        throw UnsupportedFormat("read_weights: " + origin + ": unsupported version " + std::to_string(version));
    QuantizedWeights qw;
    qw.out_features = static_cast<long>(get_u32(in, origin));
    qw.in_features = static_cast<long>(get_u32(in, origin));
    const int bits = in.get();
    if (bits == EOF)
        throw IoError("read_weights: " + origin + ": truncated header");
    if (bits != 4)
        throw UnsupportedFormat("read_weights: " + origin + ": container stores 4-bit codes only");
    qw.bits = bits;
    if (qw.out_features < 1 || qw.in_features < 1)
        throw CorruptPayload("read_weights: " + origin + ": non-positive dimensions");

    qw.scales.resize(static_cast<std::size_t>(qw.out_features));
    in.read(reinterpret_cast<char*>(qw.scales.data()),
            static_cast<std::streamsize>(qw.scales.size() * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != qw.scales.size() * sizeof(float))
        throw IoError("read_weights: " + origin + ": truncated scales");

    const long stride = (qw.in_features + 1) / 2;
    std::vector<std::uint8_t> packed(static_cast<std::size_t>(qw.out_features) * static_cast<std::size_t>(stride));
    in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (static_cast<std::size_t>(in.gcount()) != packed.size())
        throw IoError("read_weights: " + origin + ": truncated payload");
    in.peek();
    if (!in.eof())
        throw IoError("read_weights: " + origin + ": trailing bytes after payload");
    qw.q = unpack_int4(packed, qw.out_features, qw.in_features);
    return qw;
}

QuantizedWeights read_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("read_weights: cannot open '" + path.string() + "'");
    return read_weights(in, path.string());
}

} // namespace tgq
