#pragma once

#include <filesystem>

#include "seld/features.hpp"

namespace seld {

enum class WavSampleFormat { Pcm16, Float32 };

/// Reads a 4-channel RIFF/WAVE file (PCM 16-bit or IEEE float 32-bit,
/// plain or WAVE_FORMAT_EXTENSIBLE). Any other layout is rejected, as is a
/// sample rate different from `required_rate` when it is non-zero.
AudioClip read_wav(const std::filesystem::path& path, ClipFormat format, int required_rate = 24000);

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavSampleFormat sample_format = WavSampleFormat::Float32);

/// Little-endian container: "SELDFT01", u32 channels, u32 frames, u32 bins,
/// u8 source tag, then channels*frames*bins f32 values, row-major.
void write_feature_file(const std::filesystem::path& path, const FeatureTensor& t);
FeatureTensor read_feature_file(const std::filesystem::path& path);

}  // namespace seld
