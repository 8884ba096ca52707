#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "tgq/errors.hpp"
#include "tgq/npy.hpp"
#include "tgq/tensor.hpp"

using namespace tgq;

namespace {

std::string blob(const Tensor& t) {
    std::ostringstream out(std::ios::binary);
    write_npy(t, out);
    return out.str();
}

Tensor parse(const std::string& bytes) {
    std::istringstream in(bytes, std::ios::binary);
    return read_npy(in, "<test>");
}

// Raw NPY v1.0 bytes with an arbitrary header dict, for malformed inputs.
std::string raw_npy(const std::string& dict_body, const std::string& payload) {
    std::string header = dict_body;
    const std::size_t unpadded = 10 + header.size() + 1;
    const std::size_t pad = (64 - unpadded % 64) % 64;
    header += std::string(pad, ' ');
    header += '\n';
    std::string out = "\x93NUMPY";
    out += '\x01';
    out += '\x00';
    out += static_cast<char>(header.size() & 0xFF);
    out += static_cast<char>((header.size() >> 8) & 0xFF);
    out += header;
    out += payload;
    return out;
}

std::string f32_payload(const std::vector<float>& v) {
    std::string s(v.size() * 4, '\0');
    std::memcpy(s.data(), v.data(), s.size());
    return s;
}

} // namespace

TEST_CASE("f32 write matches the reference byte layout") {
    const Tensor t = Tensor::from_f32({2, 3}, {1, 2, 3, 4, 5, 6});
    const std::string bytes = blob(t);

    REQUIRE(bytes.size() == 152);
    CHECK(bytes.substr(0, 6) == "\x93NUMPY");
    CHECK(bytes[6] == '\x01');
    CHECK(bytes[7] == '\x00');
    CHECK(static_cast<unsigned char>(bytes[8]) == 0x76); // header length 118
    CHECK(static_cast<unsigned char>(bytes[9]) == 0x00);

    const std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }";
    CHECK(bytes.substr(10, dict.size()) == dict);
    CHECK(bytes[127] == '\n');
    for (std::size_t i = 10 + dict.size(); i < 127; ++i) CHECK(bytes[i] == ' ');

    float first = 0;
    std::memcpy(&first, bytes.data() + 128, 4);
    CHECK(first == 1.0f);
}

TEST_CASE("u8 write matches the reference byte layout") {
    const Tensor t = Tensor::from_u8({2, 3}, {0, 1, 2, 3, 4, 5});
    const std::string bytes = blob(t);
    REQUIRE(bytes.size() == 134);
    const std::string dict = "{'descr': '|u1', 'fortran_order': False, 'shape': (2, 3), }";
    CHECK(bytes.substr(10, dict.size()) == dict);
    CHECK(bytes.substr(128) == std::string("\x00\x01\x02\x03\x04\x05", 6));
}

TEST_CASE("1-d shape keeps the one-tuple comma") {
    const Tensor t = Tensor::from_f32({5}, {1, 2, 3, 4, 5});
    const std::string bytes = blob(t);
    const std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (5,), }";
    CHECK(bytes.substr(10, dict.size()) == dict);

    const Tensor back = parse(bytes);
    REQUIRE(back.shape() == std::vector<std::size_t>{5});
    CHECK(back.f32()[4] == 5.0f);
}

TEST_CASE("f32 round trip preserves payload bits") {
    std::vector<float> v = {0.0f, -0.0f, 1.5f, -3.25f,
                            std::numeric_limits<float>::infinity(),
                            -std::numeric_limits<float>::infinity(),
                            std::bit_cast<float>(std::uint32_t{0x7fc00001u}), // NaN payload
                            std::numeric_limits<float>::denorm_min()};
    const Tensor t = Tensor::from_f32({2, 4}, v);
    const Tensor back = parse(blob(t));

    REQUIRE(back.dtype() == DType::f32);
    REQUIRE(back.shape() == t.shape());
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(std::bit_cast<std::uint32_t>(back.f32()[i]) == std::bit_cast<std::uint32_t>(v[i]));
}

TEST_CASE("u8 round trip") {
    std::vector<std::uint8_t> v(256);
    for (int i = 0; i < 256; ++i) v[i] = static_cast<std::uint8_t>(i);
    const Tensor back = parse(blob(Tensor::from_u8({16, 16}, v)));
    REQUIRE(back.dtype() == DType::u8);
    REQUIRE(back.shape() == std::vector<std::size_t>({16, 16}));
    for (int i = 0; i < 256; ++i) CHECK(back.u8()[i] == v[i]);
}

TEST_CASE("scalar shape round trips") {
    const Tensor t = Tensor::from_f32({}, {42.0f});
    const Tensor back = parse(blob(t));
    CHECK(back.ndim() == 0);
    CHECK(back.size() == 1);
    CHECK(back.f32()[0] == 42.0f);
}

TEST_CASE("3-d round trip keeps row-major order") {
    std::vector<float> v(24);
    for (std::size_t i = 0; i < 24; ++i) v[i] = static_cast<float>(i);
    const Tensor back = parse(blob(Tensor::from_f32({2, 3, 4}, v)));
    REQUIRE(back.shape() == std::vector<std::size_t>({2, 3, 4}));
    std::vector<std::size_t> idx = {1, 2, 3};
    CHECK(back.f32()[back.flat_index(idx)] == 23.0f);
}

TEST_CASE("bad magic is a parse error") {
    CHECK_THROWS_AS(parse("hello, not an array"), ParseError);
}

TEST_CASE("newer format versions are unsupported") {
    std::string bytes = blob(Tensor::from_f32({1}, {1.0f}));
    bytes[6] = '\x02';
    CHECK_THROWS_AS(parse(bytes), UnsupportedFormat);
}

TEST_CASE("fortran order is rejected") {
    const std::string bytes =
        raw_npy("{'descr': '<f4', 'fortran_order': True, 'shape': (1,), }", f32_payload({1.0f}));
    CHECK_THROWS_AS(parse(bytes), UnsupportedFormat);
}

TEST_CASE("unsupported dtypes are rejected") {
    for (const char* descr : {"<f8", "<i4", ">f4", "|b1"}) {
        const std::string dict =
            std::string("{'descr': '") + descr + "', 'fortran_order': False, 'shape': (1,), }";
        CHECK_THROWS_AS(parse(raw_npy(dict, std::string(8, '\0'))), UnsupportedFormat);
    }
}

TEST_CASE("zero-sized arrays are rejected") {
    const std::string bytes =
        raw_npy("{'descr': '<f4', 'fortran_order': False, 'shape': (0, 3), }", "");
    CHECK_THROWS_AS(parse(bytes), UnsupportedFormat);
}

TEST_CASE("truncated payload is an io error") {
    std::string bytes = blob(Tensor::from_f32({2, 3}, {1, 2, 3, 4, 5, 6}));
    bytes.resize(bytes.size() - 5);
    CHECK_THROWS_AS(parse(bytes), IoError);
}

TEST_CASE("trailing bytes after the payload are an io error") {
    std::string bytes = blob(Tensor::from_f32({2, 3}, {1, 2, 3, 4, 5, 6}));
    bytes += "x";
    CHECK_THROWS_AS(parse(bytes), IoError);
}

TEST_CASE("missing header keys are a parse error") {
    const std::string bytes = raw_npy("{'descr': '<f4', 'shape': (1,), }", f32_payload({1.0f}));
    CHECK_THROWS_AS(parse(bytes), ParseError);
}

TEST_CASE("missing file is an io error") {
    CHECK_THROWS_AS(read_npy(std::filesystem::path("/nonexistent/dir/a.npy")), IoError);
}

TEST_CASE("file round trip") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = dir / "tgq_npy_roundtrip_test.npy";
    const Tensor t = Tensor::from_f32({3, 2}, {0.5f, -0.5f, 7.0f, -7.0f, 0.0f, 1e-30f});
    write_npy(t, path);
    const Tensor back = read_npy(path);
    REQUIRE(back.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(back.f32()[i] == t.f32()[i]);
    std::filesystem::remove(path);
}
