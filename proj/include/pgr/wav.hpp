#pragma once

// Minimal RIFF/WAVE reader and writer. Reads 16/24/32-bit PCM and 32-bit
// float (plain or WAVE_FORMAT_EXTENSIBLE); writes 32-bit float extensible.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pgr/util.hpp"

namespace pgr::wav {

class WavError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Audio {
  std::uint32_t sample_rate = 44100;
  std::uint16_t channels = 0;
  std::vector<float> interleaved;

  std::size_t frames() const { return channels ? interleaved.size() / channels : 0; }
  float at(std::size_t frame, std::size_t ch) const { return interleaved[frame * channels + ch]; }
};

inline Audio decode(std::span<const std::uint8_t> b, const std::string& name = "<memory>") {
  auto fail = [&](const std::string& why) { return WavError("'" + name + "': " + why); };
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    throw fail("not a RIFF/WAVE file");
  std::size_t off = 12;
  std::uint16_t fmt_tag = 0, bits = 0;
  Audio a;
  bool have_fmt = false;
  while (off + 8 <= b.size()) {
    const std::string id(reinterpret_cast<const char*>(b.data() + off), 4);
    const std::uint32_t len = util::get_le<std::uint32_t>(b.subspan(off + 4));
    const std::size_t body = off + 8;
    if (body + len > b.size() && id != "data") throw fail("chunk '" + id + "' overruns file");
    if (id == "fmt ") {
      if (len < 16) throw fail("fmt chunk too short");
      fmt_tag = util::get_le<std::uint16_t>(b.subspan(body));
      a.channels = util::get_le<std::uint16_t>(b.subspan(body + 2));
      a.sample_rate = util::get_le<std::uint32_t>(b.subspan(body + 4));
      bits = util::get_le<std::uint16_t>(b.subspan(body + 14));
      if (fmt_tag == 0xFFFE) {
        if (len < 40) throw fail("extensible fmt chunk too short");
        fmt_tag = util::get_le<std::uint16_t>(b.subspan(body + 24));  // sub-format GUID prefix
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw fail("data chunk before fmt chunk");
      if (a.channels == 0) throw fail("zero channels");
      const std::size_t avail = std::min<std::size_t>(len, b.size() - body);
      const std::size_t bytes_per = bits / 8;
      if (bytes_per == 0) throw fail("invalid bit depth");
      const std::size_t n = avail / bytes_per;
      a.interleaved.resize(n - n % a.channels);
      for (std::size_t i = 0; i < a.interleaved.size(); ++i) {
        const auto s = b.subspan(body + i * bytes_per);
        float v = 0.0f;
        if (fmt_tag == 3 && bits == 32) {
          v = std::bit_cast<float>(util::get_le<std::uint32_t>(s));
        } else if (fmt_tag == 1 && bits == 16) {
          v = static_cast<float>(static_cast<std::int16_t>(util::get_le<std::uint16_t>(s))) / 32768.0f;
        } else if (fmt_tag == 1 && bits == 24) {
          std::int32_t x = s[0] | (s[1] << 8) | (s[2] << 16);
          if (x & 0x800000) x -= 0x1000000;
          v = static_cast<float>(x) / 8388608.0f;
        } else if (fmt_tag == 1 && bits == 32) {
          v = static_cast<float>(static_cast<double>(static_cast<std::int32_t>(util::get_le<std::uint32_t>(s))) /
                                 2147483648.0);
        } else {
          throw fail("unsupported sample format (tag " + std::to_string(fmt_tag) + ", " + std::to_string(bits) +
                     " bits)");
        }
        a.interleaved[i] = v;
      }
      return a;
    }
    off = body + len + (len & 1);
  }
  throw fail("no data chunk");
}

inline Audio read(const std::string& path) { return decode(util::read_file(path), path); }

inline std::vector<std::uint8_t> encode(const Audio& a) {
  if (a.channels == 0 || a.interleaved.size() % a.channels != 0) throw WavError("encode: bad channel layout");
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(a.interleaved.size() * 4);
  std::vector<std::uint8_t> out;
  out.reserve(68 + data_bytes);
  auto tag = [&](const char* s) { out.insert(out.end(), s, s + 4); };
  tag("RIFF");
  util::put_le<std::uint32_t>(out, 4 + (8 + 40) + (8 + data_bytes));
  tag("WAVE");
  tag("fmt ");
  util::put_le<std::uint32_t>(out, 40);
  util::put_le<std::uint16_t>(out, 0xFFFE);
  util::put_le<std::uint16_t>(out, a.channels);
  util::put_le<std::uint32_t>(out, a.sample_rate);
  util::put_le<std::uint32_t>(out, a.sample_rate * a.channels * 4);
  util::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(a.channels * 4));
  util::put_le<std::uint16_t>(out, 32);
  util::put_le<std::uint16_t>(out, 22);
  util::put_le<std::uint16_t>(out, 32);
  util::put_le<std::uint32_t>(out, 0);  // channel mask: unassigned
  // KSDATAFORMAT_SUBTYPE_IEEE_FLOAT
  const std::uint8_t guid[16] = {0x03, 0x00, 0x00, 0x00, 0x00, 0x00, 0x10, 0x00,
                                 0x80, 0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71};
  out.insert(out.end(), guid, guid + 16);
  tag("data");
  util::put_le<std::uint32_t>(out, data_bytes);
  for (float v : a.interleaved) util::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline void write(const std::string& path, const Audio& a) { util::write_file_atomic(path, encode(a)); }

}  // namespace pgr::wav
