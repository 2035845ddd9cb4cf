#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsr/numcore/named_tensors.hpp"

// Binary tensor container shared by checkpoints, feature files and activation
// archives. Little-endian throughout:
//
//   "GSR1" | u64 entry count | entries...
//   entry = u64 name length | UTF-8 name | u64 rank | u64 extents[rank] | f32 payload

namespace gsr {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::array<char, 4> kContainerMagic = {'G', 'S', 'R', '1'};

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw FormatError("container: truncated integer field");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline void put_f32(std::ostream& os, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

inline void write_container(std::ostream& os, const NamedTensors<float>& tensors) {
  os.write(kContainerMagic.data(), kContainerMagic.size());
  detail::put_u64(os, tensors.size());
  for (const auto& [name, t] : tensors) {
    detail::put_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u64(os, t.rank());
    for (auto d : t.shape().dims()) detail::put_u64(os, d);
    for (float v : t.data()) detail::put_f32(os, v);
  }
  if (!os) throw std::runtime_error("container: write failed");
}

inline NamedTensors<float> read_container(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || magic != kContainerMagic) throw FormatError("container: bad magic");
  const std::uint64_t count = detail::get_u64(is);
  NamedTensors<float> out;
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::uint64_t name_len = detail::get_u64(is);
    if (name_len > (1u << 20)) throw FormatError("container: implausible name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name_len))) throw FormatError("container: truncated name");
    const std::uint64_t rank = detail::get_u64(is);
    if (rank > Shape::kMaxRank) throw FormatError("container: entry '" + name + "' has rank " + std::to_string(rank));
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = detail::get_u64(is);
    Shape shape(dims);
    std::vector<unsigned char> raw(shape.numel() * 4);
    if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
      throw FormatError("container: truncated payload for '" + name + "'");
    std::vector<float> data(shape.numel());
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::uint32_t u = 0;
      for (int b = 3; b >= 0; --b) u = (u << 8) | raw[i * 4 + b];
      data[i] = std::bit_cast<float>(u);
    }
    out.add(name, Tensor<float>(shape, std::move(data)));
  }
  return out;
}

inline void save_container(const std::string& path, const NamedTensors<float>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_container(os, tensors);
}

inline NamedTensors<float> load_container(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return read_container(is);
}

}  // namespace gsr
