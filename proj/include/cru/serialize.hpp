#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cru/tensor.hpp"

namespace cru {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Flat binary container of named tensors, all integers and doubles
/// little-endian:
///
///   "CRUTENS1"                      8-byte magic
///   u64 count
///   count x { u32 name_len, name bytes, u32 rank, u64 dims[rank],
///             f64 data[prod(dims)] }
inline constexpr char kTensorMagic[8] = {'C', 'R', 'U', 'T', 'E', 'N', 'S', '1'};

void write_tensors(std::ostream& out, const NamedTensors& tensors);
NamedTensors read_tensors(std::istream& in);

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
/// Throws IoError when the file is missing and ParseError when it is malformed.
NamedTensors load_tensors(const std::filesystem::path& path);

}  // namespace cru
