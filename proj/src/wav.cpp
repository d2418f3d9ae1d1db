#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "seqslu/audio.hpp"
#include "seqslu/errors.hpp"

namespace seqslu {
namespace {

uint32_t le32(const unsigned char* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t le16(const unsigned char* p) { return uint16_t(p[0] | p[1] << 8); }

void put32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

AudioWave read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::string where = " in " + path.string();
  if (bytes.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0) {
    throw DataError("not a RIFF/WAVE file" + where);
  }

  bool have_fmt = false;
  AudioWave wave;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint32_t size = le32(p + pos + 4);
    const size_t body = pos + 8;
    if (body + size > bytes.size()) throw DataError("truncated chunk" + where);
    if (std::memcmp(p + pos, "fmt ", 4) == 0) {
      if (size < 16) throw DataError("short fmt chunk" + where);
      const uint16_t format = le16(p + body);
      const uint16_t channels = le16(p + body + 2);
      const uint32_t rate = le32(p + body + 4);
      const uint16_t bits = le16(p + body + 14);
      if (format != 1) throw DataError("unsupported WAV encoding (need PCM)" + where);
      if (channels != 1) throw DataError("unsupported channel count " + std::to_string(channels) + where);
      if (bits != 16) throw DataError("unsupported sample width " + std::to_string(bits) + " bits" + where);
      if (rate != static_cast<uint32_t>(kDefaultSampleRate)) {
        throw DataError("unsupported sample rate " + std::to_string(rate) + " Hz" + where);
      }
      wave.sample_rate = static_cast<int>(rate);
      have_fmt = true;
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      if (!have_fmt) throw DataError("data chunk before fmt chunk" + where);
      const size_t n = size / 2;
      wave.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        const auto s = static_cast<int16_t>(le16(p + body + 2 * i));
        wave.samples[i] = static_cast<float>(s) / 32768.0f;
      }
      return wave;
    }
    pos = body + size + (size & 1);
  }
  throw DataError("no data chunk" + where);
}

void write_wav(const std::filesystem::path& path, const AudioWave& wave) {
  std::string out;
  const auto data_bytes = static_cast<uint32_t>(wave.samples.size() * 2);
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<uint32_t>(wave.sample_rate));
  put32(out, static_cast<uint32_t>(wave.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (float s : wave.samples) {
    const double clipped = std::clamp(static_cast<double>(s), -1.0, 32767.0 / 32768.0);
    put16(out, static_cast<uint16_t>(static_cast<int16_t>(std::lround(clipped * 32768.0))));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write WAV file " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("failed writing " + path.string());
}

}  // namespace seqslu
