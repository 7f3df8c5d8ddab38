#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace seld {

enum class ClipFormat { Mic4, Foa };

/// Multichannel audio, channel-major. FOA channels are (W, X, Y, Z) in ACN
/// order with SN3D normalization.
struct AudioClip {
  std::vector<std::vector<double>> channels;
  int sample_rate = 24000;
  ClipFormat format = ClipFormat::Mic4;

  std::size_t num_samples() const { return channels.empty() ? 0 : channels.front().size(); }
  /// Throws unless the clip has 4 equal-length channels and a positive rate.
  void validate() const;
};

enum class WindowKind { Hann };

struct StftConfig {
  int fft_size = 1024;
  int window_size = 960;
  int hop_size = 480;
  WindowKind window = WindowKind::Hann;

  void validate() const;
};

/// Frames x (fft_size/2 + 1) complex spectrogram, frame-major.
struct Spectrogram {
  int frames = 0;
  int bins = 0;
  std::vector<std::complex<double>> data;

  std::complex<double>& at(int t, int k) { return data[static_cast<std::size_t>(t) * bins + k]; }
  const std::complex<double>& at(int t, int k) const { return data[static_cast<std::size_t>(t) * bins + k]; }
};

/// Dense real matrix, row-major.
struct Matrix2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix2() = default;
  Matrix2(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

/// Triangular filters on the HTK mel scale spanning [fmin, sample_rate / 2],
/// unit peak height.
struct MelFilterbank {
  int n_mels = 0;
  int sample_rate = 0;
  int fft_size = 0;
  Matrix2 weights;  // n_mels x (fft_size/2 + 1)
  std::vector<double> centers_hz;

  static MelFilterbank make(int n_mels, int sample_rate, int fft_size, double fmin_hz = 0.0);
  int num_bins() const { return fft_size / 2 + 1; }
};

enum class FeatureSource : std::uint8_t { Mic = 0, Foa = 1, FoaMic = 2 };

int feature_channels_for(FeatureSource source);
std::string to_string(FeatureSource source);

/// channels x frames x bins, row-major.
struct FeatureTensor {
  int channels = 0;
  int frames = 0;
  int bins = 0;
  FeatureSource source = FeatureSource::Mic;
  std::vector<float> data;

  float& at(int c, int t, int f) { return data[(static_cast<std::size_t>(c) * frames + t) * bins + f]; }
  float at(int c, int t, int f) const { return data[(static_cast<std::size_t>(c) * frames + t) * bins + f]; }
  /// Throws if the channel count disagrees with the source tag or a value is
  /// not finite.
  void validate() const;
};

inline constexpr double kPhatGuard = 1e-12;
inline constexpr double kIntensityGuard = 1e-8;
inline constexpr double kLogFloor = 1e-10;
inline constexpr int kGccLags = 63;

std::vector<double> hann_window(int size);

Spectrogram stft(std::span<const double> signal, const StftConfig& cfg);

Matrix2 logmel(const Spectrogram& spec, const MelFilterbank& fb, double floor = kLogFloor);

/// Per frame: PHAT-weighted cross spectrum, inverse transform, keep the
/// centre `n_lags` lags ordered from -(n_lags-1)/2 to +(n_lags-1)/2.
/// A positive lag means channel j lags channel i.
Matrix2 gcc_phat_pair(const Spectrogram& spec_i, const Spectrogram& spec_j, int n_lags);

/// Normalized active intensity Re(conj(W) [X, Y, Z]) pooled into mel bands.
/// Returns 3 matrices (x, y, z), each frames x n_mels, values in [-1, 1].
std::vector<Matrix2> foa_intensity(const Spectrogram& w, const Spectrogram& x, const Spectrogram& y,
                                   const Spectrogram& z, const MelFilterbank& fb);

/// MIC4: 4 log-mel maps followed by 6 GCC-PHAT maps for pairs (0,1), (0,2),
/// (0,3), (1,2), (1,3), (2,3). GCC maps hold 63 lags plus a trailing zero
/// column so they match n_mels = 64.
/// FOA: 4 log-mel maps (W, X, Y, Z) followed by intensity x, y, z.
/// The clip is zero-padded at the end by (window - hop) samples so a clip of
/// n * hop samples yields n frames.
FeatureTensor extract_features(const AudioClip& clip, const StftConfig& cfg, const MelFilterbank& fb);

/// Stacks FOA (7) then MIC (10) channels into a 17-channel tensor.
FeatureTensor concat_features(const FeatureTensor& foa, const FeatureTensor& mic);

/// Per-channel z-score statistics.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  static FeatureStats compute(std::span<const FeatureTensor* const> tensors);
  void apply(FeatureTensor& t) const;
};

}  // namespace seld
