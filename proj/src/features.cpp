#include "seld/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace seld {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

void require_same_shape(const Spectrogram& a, const Spectrogram& b, const char* what) {
  if (a.frames != b.frames || a.bins != b.bins) throw std::invalid_argument(std::string(what) + ": spectrogram shapes differ");
}

void require_bins(const Spectrogram& s, const MelFilterbank& fb, const char* what) {
  if (s.bins != fb.num_bins())
    throw std::invalid_argument(std::string(what) + ": spectrogram has " + std::to_string(s.bins) +
                                " bins, filterbank expects " + std::to_string(fb.num_bins()));
}

}  // namespace

void AudioClip::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  if (channels.size() != 4) throw std::invalid_argument("clip must have exactly 4 channels");
  for (const auto& ch : channels)
    if (ch.size() != channels.front().size()) throw std::invalid_argument("clip channels differ in length");
}

void StftConfig::validate() const {
  if (fft_size <= 0 || window_size <= 0 || hop_size <= 0) throw std::invalid_argument("STFT sizes must be positive");
  if (window_size > fft_size) throw std::invalid_argument("STFT window larger than FFT size");
  if (hop_size > window_size) throw std::invalid_argument("STFT hop larger than window");
}

MelFilterbank MelFilterbank::make(int n_mels, int sample_rate, int fft_size, double fmin_hz) {
  if (n_mels <= 0 || sample_rate <= 0 || fft_size <= 0) throw std::invalid_argument("invalid filterbank dimensions");
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.sample_rate = sample_rate;
  fb.fft_size = fft_size;
  const int bins = fb.num_bins();
  fb.weights = Matrix2(n_mels, bins);

  const double mel_lo = hz_to_mel(fmin_hz);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], c = edges[m + 1], hi = edges[m + 2];
    fb.centers_hz.push_back(c);
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / fft_size;
      double w = 0.0;
      if (f > lo && f <= c)
        w = (f - lo) / (c - lo);
      else if (f > c && f < hi)
        w = (hi - f) / (hi - c);
      fb.weights.at(m, k) = w;
    }
  }
  return fb;
}

int feature_channels_for(FeatureSource source) {
  switch (source) {
    case FeatureSource::Mic: return 10;
    case FeatureSource::Foa: return 7;
    case FeatureSource::FoaMic: return 17;
  }
  throw std::invalid_argument("unknown feature source");
}

std::string to_string(FeatureSource source) {
  switch (source) {
    case FeatureSource::Mic: return "mic";
    case FeatureSource::Foa: return "foa";
    case FeatureSource::FoaMic: return "foa-mic";
  }
  return "?";
}

void FeatureTensor::validate() const {
  if (channels != feature_channels_for(source))
    throw std::invalid_argument("feature tensor has " + std::to_string(channels) + " channels, " + to_string(source) +
                                " requires " + std::to_string(feature_channels_for(source)));
  if (data.size() != static_cast<std::size_t>(channels) * frames * bins)
    throw std::invalid_argument("feature tensor data size mismatch");
  for (float v : data)
    if (!std::isfinite(v)) throw std::invalid_argument("feature tensor holds a non-finite value");
}

std::vector<double> hann_window(int size) {
  std::vector<double> w(size);
  for (int n = 0; n < size; ++n) w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / size);
  return w;
}

Spectrogram stft(std::span<const double> signal, const StftConfig& cfg) {
  cfg.validate();
  if (signal.size() < static_cast<std::size_t>(cfg.window_size))
    throw std::invalid_argument("stft: signal shorter than one window");
  for (double s : signal)
    if (!std::isfinite(s)) throw std::invalid_argument("stft: non-finite sample");

  const std::vector<double> window = hann_window(cfg.window_size);
  Spectrogram out;
  out.frames = static_cast<int>((signal.size() - cfg.window_size) / cfg.hop_size) + 1;
  out.bins = cfg.fft_size / 2 + 1;
  out.data.resize(static_cast<std::size_t>(out.frames) * out.bins);

  Eigen::FFT<double> fft;
  std::vector<double> frame(cfg.fft_size, 0.0);
  std::vector<std::complex<double>> spectrum;
  for (int t = 0; t < out.frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop_size;
    for (int n = 0; n < cfg.window_size; ++n) frame[n] = signal[start + n] * window[n];
    fft.fwd(spectrum, frame);
    std::copy_n(spectrum.begin(), out.bins, out.data.begin() + static_cast<std::ptrdiff_t>(t) * out.bins);
  }
  return out;
}

namespace {

// [first, last) nonzero bin of each filter.
std::vector<std::pair<int, int>> filter_support(const MelFilterbank& fb) {
  std::vector<std::pair<int, int>> out(fb.n_mels, {0, 0});
  for (int m = 0; m < fb.n_mels; ++m) {
    int lo = fb.weights.cols, hi = 0;
    for (int k = 0; k < fb.weights.cols; ++k)
      if (fb.weights.at(m, k) != 0.0) {
        lo = std::min(lo, k);
        hi = k + 1;
      }
    if (hi > lo) out[m] = {lo, hi};
  }
  return out;
}

}  // namespace

Matrix2 logmel(const Spectrogram& spec, const MelFilterbank& fb, double floor) {
  require_bins(spec, fb, "logmel");
  Matrix2 out(spec.frames, fb.n_mels);
  const auto support = filter_support(fb);
  std::vector<double> power(spec.bins);
  for (int t = 0; t < spec.frames; ++t) {
    for (int k = 0; k < spec.bins; ++k) power[k] = std::norm(spec.at(t, k));
    for (int m = 0; m < fb.n_mels; ++m) {
      double e = 0.0;
      for (int k = support[m].first; k < support[m].second; ++k) e += fb.weights.at(m, k) * power[k];
      out.at(t, m) = std::log(e + floor);
    }
  }
  return out;
}

Matrix2 gcc_phat_pair(const Spectrogram& spec_i, const Spectrogram& spec_j, int n_lags) {
  require_same_shape(spec_i, spec_j, "gcc_phat_pair");
  if (n_lags <= 0 || n_lags % 2 == 0) throw std::invalid_argument("gcc_phat_pair: n_lags must be odd and positive");
  const int n_fft = 2 * (spec_i.bins - 1);
  const int half = (n_lags - 1) / 2;
  if (n_lags > n_fft) throw std::invalid_argument("gcc_phat_pair: more lags than FFT points");

  Matrix2 out(spec_i.frames, n_lags);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> cross(n_fft);
  std::vector<double> corr;
  for (int t = 0; t < spec_i.frames; ++t) {
    for (int k = 0; k < spec_i.bins; ++k) {
      const std::complex<double> c = spec_i.at(t, k) * std::conj(spec_j.at(t, k));
      const double mag = std::abs(c);
      cross[k] = mag < kPhatGuard ? std::complex<double>{} : c / mag;
    }
    for (int k = spec_i.bins; k < n_fft; ++k) cross[k] = std::conj(cross[n_fft - k]);
    fft.inv(corr, cross);
    // X_i conj(X_j) peaks at lag -d when j is delayed by d; read it mirrored.
    for (int l = -half; l <= half; ++l) out.at(t, l + half) = corr[((-l) % n_fft + n_fft) % n_fft];
  }
  return out;
}

std::vector<Matrix2> foa_intensity(const Spectrogram& w, const Spectrogram& x, const Spectrogram& y,
                                   const Spectrogram& z, const MelFilterbank& fb) {
  require_same_shape(w, x, "foa_intensity");
  require_same_shape(w, y, "foa_intensity");
  require_same_shape(w, z, "foa_intensity");
  require_bins(w, fb, "foa_intensity");

  std::vector<Matrix2> out(3, Matrix2(w.frames, fb.n_mels));
  const auto support = filter_support(fb);
  std::vector<double> ix(w.bins), iy(w.bins), iz(w.bins), energy(w.bins);
  for (int t = 0; t < w.frames; ++t) {
    for (int k = 0; k < w.bins; ++k) {
      const std::complex<double> wc = std::conj(w.at(t, k));
      ix[k] = (wc * x.at(t, k)).real();
      iy[k] = (wc * y.at(t, k)).real();
      iz[k] = (wc * z.at(t, k)).real();
      energy[k] = std::norm(w.at(t, k)) + std::norm(x.at(t, k)) + std::norm(y.at(t, k)) + std::norm(z.at(t, k));
    }
    for (int m = 0; m < fb.n_mels; ++m) {
      double sx = 0.0, sy = 0.0, sz = 0.0, se = 0.0;
      for (int k = support[m].first; k < support[m].second; ++k) {
        const double g = fb.weights.at(m, k);
        sx += g * ix[k];
        sy += g * iy[k];
        sz += g * iz[k];
        se += g * energy[k];
      }
      const double n = std::sqrt(sx * sx + sy * sy + sz * sz);
      const double denom = n + kIntensityGuard * se;
      if (denom <= 0.0) continue;
      out[0].at(t, m) = sx / denom;
      out[1].at(t, m) = sy / denom;
      out[2].at(t, m) = sz / denom;
    }
  }
  return out;
}

namespace {

void put_map(FeatureTensor& ft, int channel, const Matrix2& map) {
  const int cols = std::min(map.cols, ft.bins);
  for (int t = 0; t < ft.frames; ++t)
    for (int f = 0; f < cols; ++f) ft.at(channel, t, f) = static_cast<float>(map.at(t, f));
}

}  // namespace

FeatureTensor extract_features(const AudioClip& clip, const StftConfig& cfg, const MelFilterbank& fb) {
  clip.validate();
  cfg.validate();
  if (fb.fft_size != cfg.fft_size) throw std::invalid_argument("filterbank FFT size does not match STFT config");
  if (fb.sample_rate != clip.sample_rate) throw std::invalid_argument("filterbank sample rate does not match clip");

  std::vector<Spectrogram> specs;
  specs.reserve(4);
  const std::size_t pad = static_cast<std::size_t>(cfg.window_size - cfg.hop_size);
  for (const auto& ch : clip.channels) {
    std::vector<double> padded(ch.size() + pad, 0.0);
    std::copy(ch.begin(), ch.end(), padded.begin());
    specs.push_back(stft(padded, cfg));
  }

  FeatureTensor ft;
  ft.source = clip.format == ClipFormat::Mic4 ? FeatureSource::Mic : FeatureSource::Foa;
  ft.channels = feature_channels_for(ft.source);
  ft.frames = specs.front().frames;
  ft.bins = fb.n_mels;
  ft.data.assign(static_cast<std::size_t>(ft.channels) * ft.frames * ft.bins, 0.0f);

  for (int c = 0; c < 4; ++c) put_map(ft, c, logmel(specs[c], fb));

  if (clip.format == ClipFormat::Mic4) {
    const int n_lags = std::min(kGccLags, fb.n_mels % 2 == 1 ? fb.n_mels : fb.n_mels - 1);
    int channel = 4;
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) put_map(ft, channel++, gcc_phat_pair(specs[i], specs[j], n_lags));
  } else {
    const auto intensity = foa_intensity(specs[0], specs[1], specs[2], specs[3], fb);
    for (int a = 0; a < 3; ++a) put_map(ft, 4 + a, intensity[a]);
  }
  ft.validate();
  return ft;
}

FeatureTensor concat_features(const FeatureTensor& foa, const FeatureTensor& mic) {
  if (foa.source != FeatureSource::Foa || mic.source != FeatureSource::Mic)
    throw std::invalid_argument("concat_features expects an FOA tensor and a MIC tensor");
  if (foa.frames != mic.frames || foa.bins != mic.bins)
    throw std::invalid_argument("concat_features: FOA and MIC tensors differ in shape");
  FeatureTensor out;
  out.source = FeatureSource::FoaMic;
  out.channels = foa.channels + mic.channels;
  out.frames = foa.frames;
  out.bins = foa.bins;
  out.data = foa.data;
  out.data.insert(out.data.end(), mic.data.begin(), mic.data.end());
  return out;
}

FeatureStats FeatureStats::compute(std::span<const FeatureTensor* const> tensors) {
  if (tensors.empty()) throw std::invalid_argument("FeatureStats::compute: no tensors");
  const int channels = tensors.front()->channels;
  std::vector<double> sum(channels, 0.0), sum_sq(channels, 0.0);
  std::vector<double> count(channels, 0.0);
  for (const FeatureTensor* t : tensors) {
    if (t->channels != channels) throw std::invalid_argument("FeatureStats::compute: channel counts differ");
    const std::size_t plane = static_cast<std::size_t>(t->frames) * t->bins;
    for (int c = 0; c < channels; ++c) {
      const float* p = t->data.data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum[c] += p[i];
        sum_sq[c] += static_cast<double>(p[i]) * p[i];
      }
      count[c] += static_cast<double>(plane);
    }
  }
  FeatureStats s;
  for (int c = 0; c < channels; ++c) {
    const double mean = sum[c] / count[c];
    const double var = std::max(sum_sq[c] / count[c] - mean * mean, 0.0);
    s.mean.push_back(mean);
    s.stddev.push_back(std::max(std::sqrt(var), 1e-8));
  }
  return s;
}

void FeatureStats::apply(FeatureTensor& t) const {
  if (static_cast<int>(mean.size()) != t.channels) throw std::invalid_argument("FeatureStats: channel count mismatch");
  const std::size_t plane = static_cast<std::size_t>(t.frames) * t.bins;
  for (int c = 0; c < t.channels; ++c) {
    float* p = t.data.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] = static_cast<float>((p[i] - mean[c]) / stddev[c]);
  }
}

}  // namespace seld
