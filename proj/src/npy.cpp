#include "tgq/npy.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace tgq {
namespace {

const char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    std::size_t e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

// Pulls the value token for `key` out of the header dict. The header is a
// python literal dict with single-quoted keys; we only need three keys, so a
// string scan beats a real parser.
std::string dict_value(const std::string& dict, const std::string& key, const std::string& origin) {
    const std::string quoted = "'" + key + "'";
    std::size_t kpos = dict.find(quoted);
    if (kpos == std::string::npos)
        throw ParseError("read_npy: " + origin + ": header is missing key '" + key + "'");
    std::size_t colon = dict.find(':', kpos + quoted.size());
    if (colon == std::string::npos)
        throw ParseError("read_npy: " + origin + ": malformed header near '" + key + "'");
    std::size_t vpos = colon + 1;
    while (vpos < dict.size() && (dict[vpos] == ' ' || dict[vpos] == '\t')) ++vpos;
    if (vpos >= dict.size())
        throw ParseError("read_npy: " + origin + ": header value for '" + key + "' is missing");
    if (dict[vpos] == '\'') {
        std::size_t end = dict.find('\'', vpos + 1);
        if (end == std::string::npos)
            throw ParseError("read_npy: " + origin + ": unterminated string for '" + key + "'");
        return dict.substr(vpos + 1, end - vpos - 1);
    }
    if (dict[vpos] == '(') {
        std::size_t end = dict.find(')', vpos + 1);
        if (end == std::string::npos)
            throw ParseError("read_npy: " + origin + ": unterminated tuple for '" + key + "'");
        return dict.substr(vpos, end - vpos + 1);
    }
    std::size_t end = dict.find_first_of(",}", vpos);
    if (end == std::string::npos)
        throw ParseError("read_npy: " + origin + ": malformed header value for '" + key + "'");
    return trim(dict.substr(vpos, end - vpos));
}

std::vector<std::size_t> parse_shape(const std::string& tuple, const std::string& origin) {
    if (tuple.size() < 2 || tuple.front() != '(' || tuple.back() != ')')
        throw ParseError("read_npy: " + origin + ": shape is not a tuple");
    std::vector<std::size_t> shape;
    std::string body = tuple.substr(1, tuple.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue; // trailing comma of 1-tuples
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            throw ParseError("read_npy: " + origin + ": bad shape entry '" + item + "'");
        }
        if (pos != item.size())
            throw ParseError("read_npy: " + origin + ": bad shape entry '" + item + "'");
        if (v == 0)
            throw UnsupportedFormat("read_npy: " + origin + ": zero-sized arrays are not supported");
        shape.push_back(static_cast<std::size_t>(v));
    }
    return shape;
}

std::string shape_tuple(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        s += std::to_string(shape[i]);
        if (shape.size() == 1) s += ",";
        else if (i + 1 < shape.size()) s += ", ";
    }
    s += ")";
    return s;
}

} // namespace

Tensor read_npy(std::istream& in, const std::string& origin) {
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, kMagic, 6) != 0)
        throw ParseError("read_npy: " + origin + ": not an NPY file");
    unsigned char ver[2];
    in.read(reinterpret_cast<char*>(ver), 2);
    if (!in)
        throw ParseError("read_npy: " + origin + ": truncated version field");
    if (ver[0] != 1 || ver[1] != 0)
        throw UnsupportedFormat("read_npy: " + origin + ": only NPY version 1.0 is supported");
    unsigned char lenb[2];
    in.read(reinterpret_cast<char*>(lenb), 2);
    if (!in)
        throw ParseError("read_npy: " + origin + ": truncated header length");
    const std::size_t hlen = static_cast<std::size_t>(lenb[0]) | (static_cast<std::size_t>(lenb[1]) << 8);
    std::string header(hlen, '\0');
    in.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!in)
        throw ParseError("read_npy: " + origin + ": truncated header");

    const std::string descr = dict_value(header, "descr", origin);
    const std::string order = dict_value(header, "fortran_order", origin);
    const std::string shape_str = dict_value(header, "shape", origin);
    if (order == "True")
        throw UnsupportedFormat("read_npy: " + origin + ": fortran_order arrays are not supported");
    if (order != "False")
        throw ParseError("read_npy: " + origin + ": bad fortran_order value '" + order + "'");

    DType dtype;
    std::size_t item = 0;
    if (descr == "<f4") {
        dtype = DType::f32;
        item = 4;
    } else if (descr == "|u1") {
        dtype = DType::u8;
        item = 1;
    } else {
        throw UnsupportedFormat("read_npy: " + origin + ": dtype '" + descr + "' is not supported");
    }

    const std::vector<std::size_t> shape = parse_shape(shape_str, origin);
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;

    std::vector<char> payload(n * item);
    in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size())
        throw IoError("read_npy: " + origin + ": payload truncated (expected " +
                      std::to_string(payload.size()) + " bytes)");
    in.peek();
    if (!in.eof())
        throw IoError("read_npy: " + origin + ": trailing bytes after payload");

    if (dtype == DType::f32) {
        std::vector<float> values(n);
        std::memcpy(values.data(), payload.data(), payload.size());
        return Tensor::from_f32(shape, std::move(values));
    }
    std::vector<std::uint8_t> values(n);
    std::memcpy(values.data(), payload.data(), payload.size());
    return Tensor::from_u8(shape, std::move(values));
}

Tensor read_npy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("read_npy: cannot open '" + path.string() + "'");
    return read_npy(in, path.string());
}

void write_npy(const Tensor& t, std::ostream& out) {
    const char* descr = t.dtype() == DType::f32 ? "<f4" : "|u1";
    std::string dict = "{'descr': '";
    dict += descr;
    dict += "', 'fortran_order': False, 'shape': ";
    dict += shape_tuple(t.shape());
    dict += ", }";
    // magic(6) + version(2) + headerlen(2) + dict + pad + '\n' is 64-aligned
    const std::size_t unpadded = 10 + dict.size() + 1;
    const std::size_t pad = (64 - unpadded % 64) % 64;
    dict += std::string(pad, ' ');
    dict += '\n';
    if (dict.size() > 0xFFFF)
        throw UnsupportedFormat("write_npy: header too large for NPY version 1.0");

    out.write(kMagic, 6);
    const unsigned char ver[2] = {1, 0};
    out.write(reinterpret_cast<const char*>(ver), 2);
    const unsigned char lenb[2] = {static_cast<unsigned char>(dict.size() & 0xFF),
                                   static_cast<unsigned char>((dict.size() >> 8) & 0xFF)};
    out.write(reinterpret_cast<const char*>(lenb), 2);
    out.write(dict.data(), static_cast<std::streamsize>(dict.size()));

    if (t.dtype() == DType::f32) {
        auto v = t.f32();
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(float)));
    } else {
        auto v = t.u8();
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size()));
    }
    if (!out)
        throw IoError("write_npy: stream write failed");
}

void write_npy(const Tensor& t, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("write_npy: cannot open '" + path.string() + "'");
    write_npy(t, out);
    out.flush();
    if (!out)
        throw IoError("write_npy: write to '" + path.string() + "' failed");
}

} // namespace tgq
