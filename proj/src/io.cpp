#include "seld/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "seld/binary.hpp"

namespace seld {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::runtime_error wav_error(const std::filesystem::path& path, const std::string& what) {
  return std::runtime_error(path.string() + ": " + what);
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path, ClipFormat format, int required_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw wav_error(path, "cannot open");
  BinaryReader r(in);

  char riff[4], wave[4];
  r.bytes(riff, 4);
  r.u32();
  r.bytes(wave, 4);
  if (std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0) throw wav_error(path, "not a RIFF/WAVE file");

  std::uint16_t fmt_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<char> payload;
  while (true) {
    char id[4];
    if (!r.try_bytes(id, 4)) break;
    const std::uint32_t size = r.u32();
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) throw wav_error(path, "truncated fmt chunk");
      fmt_tag = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      bits = r.u16();
      std::uint32_t consumed = 16;
      if (fmt_tag == kFormatExtensible && size >= 40) {
        r.u16();  // cbSize
        r.u16();  // valid bits
        r.u32();  // channel mask
        fmt_tag = r.u16();  // first two bytes of the sub-format GUID
        char rest[14];
        r.bytes(rest, 14);
        consumed = 40;
      }
      r.skip(size - consumed + (size & 1));
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      payload.resize(size);
      r.bytes(payload.data(), size);
      break;
    } else {
      r.skip(size + (size & 1));
    }
  }
  if (!have_fmt) throw wav_error(path, "missing fmt chunk");
  if (payload.empty()) throw wav_error(path, "missing or empty data chunk");
  if (channels != 4) throw wav_error(path, "expected 4 channels, found " + std::to_string(channels));
  if (required_rate > 0 && static_cast<int>(rate) != required_rate)
    throw wav_error(path, "sample rate " + std::to_string(rate) + " Hz not supported (need " +
                              std::to_string(required_rate) + ")");
  const bool pcm16 = fmt_tag == kFormatPcm && bits == 16;
  const bool f32 = fmt_tag == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) throw wav_error(path, "only 16-bit PCM and 32-bit float samples are supported");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frames = payload.size() / (bytes_per_sample * channels);
  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.format = format;
  clip.channels.assign(channels, std::vector<double>(frames));
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* s = p + (n * channels + c) * bytes_per_sample;
      if (pcm16) {
        const auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(s[0] | (s[1] << 8)));
        clip.channels[c][n] = v / 32768.0;
      } else {
        const std::uint32_t bits32 = static_cast<std::uint32_t>(s[0]) | (static_cast<std::uint32_t>(s[1]) << 8) |
                                     (static_cast<std::uint32_t>(s[2]) << 16) |
                                     (static_cast<std::uint32_t>(s[3]) << 24);
        clip.channels[c][n] = std::bit_cast<float>(bits32);
      }
    }
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavSampleFormat sample_format) {
  clip.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw wav_error(path, "cannot open for writing");
  BinaryWriter w(out);

  const std::uint16_t channels = static_cast<std::uint16_t>(clip.channels.size());
  const bool pcm16 = sample_format == WavSampleFormat::Pcm16;
  const std::uint16_t bits = pcm16 ? 16 : 32;
  const std::uint32_t frames = static_cast<std::uint32_t>(clip.num_samples());
  const std::uint32_t data_bytes = frames * channels * (bits / 8);

  w.bytes("RIFF", 4);
  w.u32(36 + data_bytes);
  w.bytes("WAVE", 4);
  w.bytes("fmt ", 4);
  w.u32(16);
  w.u16(pcm16 ? kFormatPcm : kFormatFloat);
  w.u16(channels);
  w.u32(static_cast<std::uint32_t>(clip.sample_rate));
  w.u32(static_cast<std::uint32_t>(clip.sample_rate) * channels * (bits / 8));
  w.u16(static_cast<std::uint16_t>(channels * (bits / 8)));
  w.u16(bits);
  w.bytes("data", 4);
  w.u32(data_bytes);
  for (std::uint32_t n = 0; n < frames; ++n) {
    for (std::uint16_t c = 0; c < channels; ++c) {
      const double s = clip.channels[c][n];
      if (pcm16) {
        const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
        w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
      } else {
        w.f32(static_cast<float>(s));
      }
    }
  }
  if (!out) throw wav_error(path, "write failed");
}

namespace {
constexpr char kFeatureMagic[8] = {'S', 'E', 'L', 'D', 'F', 'T', '0', '1'};
}

void write_feature_file(const std::filesystem::path& path, const FeatureTensor& t) {
  t.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  BinaryWriter w(out);
  w.bytes(kFeatureMagic, 8);
  w.u32(static_cast<std::uint32_t>(t.channels));
  w.u32(static_cast<std::uint32_t>(t.frames));
  w.u32(static_cast<std::uint32_t>(t.bins));
  w.u8(static_cast<std::uint8_t>(t.source));
  w.f32_array(t.data);
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

FeatureTensor read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  BinaryReader r(in);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kFeatureMagic, 8) != 0) throw std::runtime_error(path.string() + ": not a SELDFT01 file");
  FeatureTensor t;
  t.channels = static_cast<int>(r.u32());
  t.frames = static_cast<int>(r.u32());
  t.bins = static_cast<int>(r.u32());
  const std::uint8_t tag = r.u8();
  if (tag > 2) throw std::runtime_error(path.string() + ": unknown source tag");
  t.source = static_cast<FeatureSource>(tag);
  t.data.resize(static_cast<std::size_t>(t.channels) * t.frames * t.bins);
  r.f32_array(t.data);
  t.validate();
  return t;
}

}  // namespace seld
