#pragma once

#include <filesystem>
#include <iosfwd>

#include "tgq/tensor.hpp"

namespace tgq {

// NPY version 1.0, little-endian '<f4' and '|u1', C order only.
// Round-trips are bit exact; payload bytes are never reinterpreted.
Tensor read_npy(const std::filesystem::path& path);
Tensor read_npy(std::istream& in, const std::string& origin = "<stream>");

void write_npy(const Tensor& t, const std::filesystem::path& path);
void write_npy(const Tensor& t, std::ostream& out);

} // namespace tgq
