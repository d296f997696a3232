#include "cru/serialize.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "cru/errors.hpp"

namespace cru {

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw ParseError("truncated tensor container");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

constexpr std::uint32_t kMaxNameLength = 1u << 16;

}  // namespace

void write_tensors(std::ostream& out, const NamedTensors& tensors) {
  out.write(kTensorMagic, sizeof(kTensorMagic));
  put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(out, d);
    for (double v : t.data()) put<double>(out, v);
  }
}

NamedTensors read_tensors(std::istream& in) {
  char magic[sizeof(kTensorMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kTensorMagic, sizeof(magic)) != 0) {
    throw ParseError("not a tensor container (bad magic)");
  }
  const auto count = get<std::uint64_t>(in);
  NamedTensors out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in);
    if (name_len > kMaxNameLength) throw ParseError("tensor name too long");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw ParseError("truncated tensor name");
    const auto rank = get<std::uint32_t>(in);
    if (rank < 1 || rank > 3) throw ParseError("tensor '" + name + "' has invalid rank");
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in);
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = get<double>(in);
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_tensors(out, tensors);
  if (!out) throw IoError("write failed for " + path.string());
}

NamedTensors load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return read_tensors(in);
}

}  // namespace cru
