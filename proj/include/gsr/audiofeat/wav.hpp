#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsr {

struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_ms() const { return 1000.0 * double(samples.size()) / sample_rate; }
};

class WavError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
inline std::uint16_t le16(const unsigned char* p) { return std::uint16_t(p[0] | p[1] << 8); }

inline void put32(std::ofstream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline void put16(std::ofstream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace detail

/// Reads 16-bit PCM mono WAV; samples are scaled to [-1, 1).
inline AudioSignal read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw WavError("cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE")
    throw WavError("'" + path + "' is not a RIFF/WAVE file");
  AudioSignal sig;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(bytes.begin() + pos, bytes.begin() + pos + 4);
    const std::size_t len = detail::le32(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) throw WavError("'" + path + "': truncated chunk " + id);
    if (id == "fmt ") {
      if (len < 16) throw WavError("'" + path + "': short fmt chunk");
      const auto format = detail::le16(&bytes[body]);
      const auto channels = detail::le16(&bytes[body + 2]);
      sig.sample_rate = int(detail::le32(&bytes[body + 4]));
      const auto bits = detail::le16(&bytes[body + 14]);
      if (format != 1 || channels != 1 || bits != 16)
        throw WavError("'" + path + "': only 16-bit PCM mono is supported");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw WavError("'" + path + "': data chunk before fmt");
      sig.samples.resize(len / 2);
      for (std::size_t i = 0; i < sig.samples.size(); ++i)
        sig.samples[i] = double(std::int16_t(detail::le16(&bytes[body + 2 * i]))) / 32768.0;
      return sig;
    }
    pos = body + len + (len & 1);
  }
  throw WavError("'" + path + "': no data chunk");
}

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1].
inline void write_wav(const std::string& path, const AudioSignal& sig) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw WavError("cannot open '" + path + "' for writing");
  const std::uint32_t data_len = std::uint32_t(sig.samples.size() * 2);
  os.write("RIFF", 4);
  detail::put32(os, 36 + data_len);
  os.write("WAVEfmt ", 8);
  detail::put32(os, 16);
  detail::put16(os, 1);
  detail::put16(os, 1);
  detail::put32(os, std::uint32_t(sig.sample_rate));
  detail::put32(os, std::uint32_t(sig.sample_rate) * 2);
  detail::put16(os, 2);
  detail::put16(os, 16);
  os.write("data", 4);
  detail::put32(os, data_len);
  for (double s : sig.samples) {
    const double c = std::clamp(s, -1.0, 32767.0 / 32768.0);
    detail::put16(os, std::uint16_t(std::int16_t(std::lround(c * 32768.0))));
  }
  if (!os) throw WavError("write to '" + path + "' failed");
}

}  // namespace gsr
