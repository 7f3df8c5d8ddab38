#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "seld/binary.hpp"
#include "seld/io.hpp"
#include "support/tempdir.hpp"

using namespace seld;

namespace {

AudioClip random_clip(std::size_t n, ClipFormat fmt, std::uint64_t seed) {
  AudioClip c;
  c.format = fmt;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  for (int ch = 0; ch < 4; ++ch) {
    std::vector<double> x(n);
    for (double& v : x) v = u(rng);
    c.channels.push_back(std::move(x));
  }
  return c;
}

void write_raw_wav(const std::filesystem::path& p, int channels, int rate, int bits, int fmt_tag) {
  std::ofstream os(p, std::ios::binary);
  BinaryWriter w(os);
  const std::uint32_t frames = 10;
  const std::uint32_t data_bytes = frames * channels * bits / 8;
  w.bytes("RIFF", 4);
  w.u32(36 + data_bytes);
  w.bytes("WAVE", 4);
  w.bytes("fmt ", 4);
  w.u32(16);
  w.u16(static_cast<std::uint16_t>(fmt_tag));
  w.u16(static_cast<std::uint16_t>(channels));
  w.u32(static_cast<std::uint32_t>(rate));
  w.u32(static_cast<std::uint32_t>(rate * channels * bits / 8));
  w.u16(static_cast<std::uint16_t>(channels * bits / 8));
  w.u16(static_cast<std::uint16_t>(bits));
  w.bytes("data", 4);
  w.u32(data_bytes);
  std::string zeros(data_bytes, '\0');
  w.bytes(zeros.data(), zeros.size());
}

}  // namespace

TEST_CASE("wav float32 round trip is exact") {
  testutil::TempDir dir;
  const auto clip = random_clip(1000, ClipFormat::Foa, 1);
  write_wav(dir / "a.wav", clip, WavSampleFormat::Float32);
  const auto back = read_wav(dir / "a.wav", ClipFormat::Foa);
  REQUIRE(back.channels.size() == 4);
  CHECK(back.sample_rate == 24000);
  CHECK(back.format == ClipFormat::Foa);
  for (int c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 1000; ++i)
      CHECK(back.channels[c][i] == static_cast<double>(static_cast<float>(clip.channels[c][i])));
}

TEST_CASE("wav pcm16 round trip within one quantization step") {
  testutil::TempDir dir;
  const auto clip = random_clip(500, ClipFormat::Mic4, 2);
  write_wav(dir / "b.wav", clip, WavSampleFormat::Pcm16);
  const auto back = read_wav(dir / "b.wav", ClipFormat::Mic4);
  for (int c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 500; ++i) CHECK(std::abs(back.channels[c][i] - clip.channels[c][i]) <= 1.0 / 32767);
}

TEST_CASE("wav reader rejects unsupported layouts") {
  testutil::TempDir dir;
  write_raw_wav(dir / "stereo.wav", 2, 24000, 16, 1);
  CHECK_THROWS(read_wav(dir / "stereo.wav", ClipFormat::Mic4));
  write_raw_wav(dir / "rate.wav", 4, 48000, 16, 1);
  CHECK_THROWS(read_wav(dir / "rate.wav", ClipFormat::Mic4));
  CHECK_NOTHROW(read_wav(dir / "rate.wav", ClipFormat::Mic4, 0));
  write_raw_wav(dir / "pcm24.wav", 4, 24000, 24, 1);
  CHECK_THROWS(read_wav(dir / "pcm24.wav", ClipFormat::Mic4));
  write_raw_wav(dir / "ok.wav", 4, 24000, 16, 1);
  CHECK(read_wav(dir / "ok.wav", ClipFormat::Mic4).num_samples() == 10);
  {
    std::ofstream os(dir / "junk.wav", std::ios::binary);
    os << "not a wave file at all";
  }
  CHECK_THROWS(read_wav(dir / "junk.wav", ClipFormat::Mic4));
  CHECK_THROWS(read_wav(dir / "missing.wav", ClipFormat::Mic4));
}

TEST_CASE("feature file round trip and header layout") {
  testutil::TempDir dir;
  FeatureTensor t;
  t.channels = 10;
  t.frames = 3;
  t.bins = 64;
  t.source = FeatureSource::Mic;
  t.data.resize(10 * 3 * 64);
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<float>(i) * 0.25f - 7.0f;
  write_feature_file(dir / "x.feat", t);

  std::ifstream is(dir / "x.feat", std::ios::binary);
  char magic[8];
  is.read(magic, 8);
  CHECK(std::memcmp(magic, "SELDFT01", 8) == 0);
  BinaryReader r(is);
  CHECK(r.u32() == 10);
  CHECK(r.u32() == 3);
  CHECK(r.u32() == 64);
  CHECK(r.u8() == 0);
  CHECK(r.f32() == -7.0f);

  const auto back = read_feature_file(dir / "x.feat");
  CHECK(back.channels == 10);
  CHECK(back.frames == 3);
  CHECK(back.bins == 64);
  CHECK(back.source == FeatureSource::Mic);
  CHECK(back.data == t.data);

  {
    std::ofstream os(dir / "trunc.feat", std::ios::binary);
    os.write("SELDFT01", 8);
  }
  CHECK_THROWS(read_feature_file(dir / "trunc.feat"));
}
