#include "seld/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace seld::nn {

namespace {

template <typename T>
void uniform_fill(AlignedVector<T>& v, double bound, Rng& rng) {
  std::uniform_real_distribution<double> d(-bound, bound);
  for (T& x : v) x = static_cast<T>(d(rng));
}

template <typename T>
void require_channels(const Tensor4<T>& x, int expected, const char* layer) {
  if (x.c != expected)
    throw std::invalid_argument(std::string(layer) + ": expected " + std::to_string(expected) + " channels, got " +
                                std::to_string(x.c));
}

// Sum of term(0..n) in double over eight independent accumulators, so long
// reductions are not one serial chain of additions.
template <typename F>
double lane_sum(std::size_t n, F term) {
  double acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (int k = 0; k < 8; ++k) acc[k] += term(i + k);
  double tail = 0.0;
  for (; i < n; ++i) tail += term(i);
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel_t, int kernel_f, Rng& rng)
    : weight(name + ".weight", {out_channels, in_channels, kernel_t, kernel_f}),
      bias(name + ".bias", {out_channels}),
      in_(in_channels),
      out_(out_channels),
      kt_(kernel_t),
      kf_(kernel_f) {
  if (in_channels <= 0 || out_channels <= 0) throw std::invalid_argument("Conv2d: channel counts must be positive");
  if (kernel_t % 2 == 0 || kernel_f % 2 == 0) throw std::invalid_argument("Conv2d: same padding needs odd kernels");
  const double fan_in = static_cast<double>(in_channels) * kernel_t * kernel_f;
  uniform_fill(weight.value, std::sqrt(6.0 / fan_in), rng);
}

namespace {

// Columns per im2col tile; a tile of a 3x3 conv over 16 channels stays in L2.
constexpr int kTileCols = 512;

int tile_rows(int f) { return std::max(1, kTileCols / std::max(f, 1)); }

// Patch matrix for time rows [t0, t0 + tt) of one item.
template <typename T>
void im2col_tile(const Tensor4<T>& x, int item, int kt, int kf, int t0, int tt, MatrixX<T>& col) {
  const int pad_t = kt / 2, pad_f = kf / 2;
  col.setZero(static_cast<Eigen::Index>(x.c) * kt * kf, static_cast<Eigen::Index>(tt) * x.f);
  for (int ci = 0; ci < x.c; ++ci) {
    const T* src = x.channel(item, ci);
    for (int i = 0; i < kt; ++i)
      for (int j = 0; j < kf; ++j) {
        T* dst = col.row((ci * kt + i) * kf + j).data();
        const int f_lo = std::max(0, pad_f - j);
        const int f_hi = std::min(x.f, x.f + pad_f - j);
        for (int t = 0; t < tt; ++t) {
          const int ts = t0 + t + i - pad_t;
          if (ts < 0 || ts >= x.t) continue;
          const T* s = src + static_cast<std::size_t>(ts) * x.f + (j - pad_f);
          T* d = dst + static_cast<std::size_t>(t) * x.f;
          for (int f = f_lo; f < f_hi; ++f) d[f] = s[f];
        }
      }
  }
}

// Adjoint of im2col_tile: accumulates patch gradients into dx.
template <typename T>
void col2im_tile(const MatrixX<T>& dcol, int item, int kt, int kf, int t0, int tt, Tensor4<T>& dx) {
  const int pad_t = kt / 2, pad_f = kf / 2;
  for (int ci = 0; ci < dx.c; ++ci) {
    T* dst = dx.channel(item, ci);
    for (int i = 0; i < kt; ++i)
      for (int j = 0; j < kf; ++j) {
        const T* src = dcol.row((ci * kt + i) * kf + j).data();
        const int f_lo = std::max(0, pad_f - j);
        const int f_hi = std::min(dx.f, dx.f + pad_f - j);
        for (int t = 0; t < tt; ++t) {
          const int ts = t0 + t + i - pad_t;
          if (ts < 0 || ts >= dx.t) continue;
          T* d = dst + static_cast<std::size_t>(ts) * dx.f + (j - pad_f);
          const T* s = src + static_cast<std::size_t>(t) * dx.f;
          for (int f = f_lo; f < f_hi; ++f) d[f] += s[f];
        }
      }
  }
}

}  // namespace

template <typename T>
Tensor4<T> Conv2d<T>::forward(const Tensor4<T>& x) {
  require_channels(x, in_, "Conv2d");
  x_ = x;
  Tensor4<T> y(x.n, out_, x.t, x.f);
  ConstMatrixMap<T> w(weight.value.data(), out_, in_ * kt_ * kf_);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.value.data(), out_);

  const int step = tile_rows(x.f);
  MatrixX<T> col;
  for (int item = 0; item < x.n; ++item) {
    auto out = y.item(item);
    if (kt_ == 1 && kf_ == 1) {
      out.noalias() = w * x.item(item);
    } else {
      for (int t0 = 0; t0 < x.t; t0 += step) {
        const int tt = std::min(step, x.t - t0);
        im2col_tile(x, item, kt_, kf_, t0, tt, col);
        out.middleCols(static_cast<Eigen::Index>(t0) * x.f, col.cols()).noalias() = w * col;
      }
    }
    out.colwise() += b;
  }
  return y;
}

template <typename T>
Tensor4<T> Conv2d<T>::backward(const Tensor4<T>& dy, bool need_input_grad) {
  if (dy.c != out_ || dy.n != x_.n || dy.t != x_.t || dy.f != x_.f)
    throw std::invalid_argument("Conv2d::backward: gradient shape does not match the forward pass");
  ConstMatrixMap<T> w(weight.value.data(), out_, in_ * kt_ * kf_);
  MatrixMap<T> gw(weight.grad.data(), out_, in_ * kt_ * kf_);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb(bias.grad.data(), out_);

  Tensor4<T> dx;
  if (need_input_grad) dx = Tensor4<T>(dy.n, in_, dy.t, dy.f);
  const int step = tile_rows(dy.f);
  MatrixX<T> col, dcol;
  for (int item = 0; item < dy.n; ++item) {
    const auto g = dy.item(item);
    gb += g.rowwise().sum();
    if (kt_ == 1 && kf_ == 1) {
      gw.noalias() += g * x_.item(item).transpose();
      if (need_input_grad) dx.item(item).noalias() = w.transpose() * g;
      continue;
    }
    for (int t0 = 0; t0 < dy.t; t0 += step) {
      const int tt = std::min(step, dy.t - t0);
      const auto gt = g.middleCols(static_cast<Eigen::Index>(t0) * dy.f, static_cast<Eigen::Index>(tt) * dy.f);
      im2col_tile(x_, item, kt_, kf_, t0, tt, col);
      gw.noalias() += gt * col.transpose();
      if (!need_input_grad) continue;
      dcol.noalias() = w.transpose() * gt;
      col2im_tile(dcol, item, kt_, kf_, t0, tt, dx);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(const std::string& name, int channels)
    : scale(name + ".scale", {channels}),
      shift(name + ".shift", {channels}),
      running_mean(name + ".running_mean", {channels}, false),
      running_var(name + ".running_var", {channels}, false) {
  std::fill(scale.value.begin(), scale.value.end(), T(1));
  std::fill(running_var.value.begin(), running_var.value.end(), T(1));
}

template <typename T>
Tensor4<T> BatchNorm2d<T>::forward(const Tensor4<T>& x, Mode mode) {
  require_channels(x, static_cast<int>(scale.size()), "BatchNorm2d");
  mode_ = mode;
  const std::size_t plane = x.plane();
  const double count = static_cast<double>(plane) * x.n;
  xhat_ = Tensor4<T>(x.n, x.c, x.t, x.f);
  inv_std_.assign(x.c, T(0));
  Tensor4<T> y(x.n, x.c, x.t, x.f);

  for (int ch = 0; ch < x.c; ++ch) {
    double mean, var;
    if (mode == Mode::Train) {
      double sum = 0.0;
      for (int b = 0; b < x.n; ++b) {
        const T* p = x.channel(b, ch);
        sum += lane_sum(plane, [p](std::size_t i) { return static_cast<double>(p[i]); });
      }
      mean = sum / count;
      double sq = 0.0;
      for (int b = 0; b < x.n; ++b) {
        const T* p = x.channel(b, ch);
        sq += lane_sum(plane, [p, mean](std::size_t i) {
          const double d = p[i] - mean;
          return d * d;
        });
      }
      var = sq / count;
      const double unbiased = count > 1.0 ? sq / (count - 1.0) : var;
      running_mean.value[ch] = static_cast<T>((1.0 - kMomentum) * running_mean.value[ch] + kMomentum * mean);
      running_var.value[ch] = static_cast<T>((1.0 - kMomentum) * running_var.value[ch] + kMomentum * unbiased);
    } else {
      mean = running_mean.value[ch];
      var = running_var.value[ch];
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(var + kEps));
    inv_std_[ch] = inv;
    const T m = static_cast<T>(mean);
    const T g = scale.value[ch], s = shift.value[ch];
    for (int b = 0; b < x.n; ++b) {
      const T* p = x.channel(b, ch);
      T* xh = xhat_.channel(b, ch);
      T* out = y.channel(b, ch);
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = (p[i] - m) * inv;
        out[i] = g * xh[i] + s;
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<T> BatchNorm2d<T>::backward(const Tensor4<T>& dy) {
  if (!dy.same_shape(xhat_)) throw std::invalid_argument("BatchNorm2d::backward: shape mismatch");
  const std::size_t plane = dy.plane();
  const double count = static_cast<double>(plane) * dy.n;
  Tensor4<T> dx(dy.n, dy.c, dy.t, dy.f);
  for (int ch = 0; ch < dy.c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int b = 0; b < dy.n; ++b) {
      const T* g = dy.channel(b, ch);
      const T* xh = xhat_.channel(b, ch);
      sum_dy += lane_sum(plane, [g](std::size_t i) { return static_cast<double>(g[i]); });
      sum_dy_xhat += lane_sum(plane, [g, xh](std::size_t i) { return static_cast<double>(g[i]) * xh[i]; });
    }
    scale.grad[ch] += static_cast<T>(sum_dy_xhat);
    shift.grad[ch] += static_cast<T>(sum_dy);
    const T k = scale.value[ch] * inv_std_[ch];
    if (mode_ == Mode::Eval) {
      for (int b = 0; b < dy.n; ++b) {
        const T* g = dy.channel(b, ch);
        T* d = dx.channel(b, ch);
        for (std::size_t i = 0; i < plane; ++i) d[i] = k * g[i];
      }
      continue;
    }
    const T mean_dy = static_cast<T>(sum_dy / count);
    const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / count);
    for (int b = 0; b < dy.n; ++b) {
      const T* g = dy.channel(b, ch);
      const T* xh = xhat_.channel(b, ch);
      T* d = dx.channel(b, ch);
      for (std::size_t i = 0; i < plane; ++i) d[i] = k * (g[i] - mean_dy - xh[i] * mean_dy_xhat);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// MaxPool2d

template <typename T>
Tensor4<T> MaxPool2d<T>::forward(const Tensor4<T>& x) {
  const int ot = x.t / pt_, of = x.f / pf_;
  if (ot == 0 || of == 0) throw std::invalid_argument("MaxPool2d: input smaller than the pooling window");
  in_n_ = x.n;
  in_c_ = x.c;
  in_t_ = x.t;
  in_f_ = x.f;
  Tensor4<T> y(x.n, x.c, ot, of);
  argmax_.assign(y.size(), 0);
  for (int b = 0; b < x.n; ++b)
    for (int ch = 0; ch < x.c; ++ch) {
      const T* src = x.channel(b, ch);
      for (int t = 0; t < ot; ++t)
        for (int f = 0; f < of; ++f) {
          std::size_t best = static_cast<std::size_t>(t * pt_) * x.f + f * pf_;
          for (int i = 0; i < pt_; ++i)
            for (int j = 0; j < pf_; ++j) {
              const std::size_t idx = static_cast<std::size_t>(t * pt_ + i) * x.f + f * pf_ + j;
              if (src[idx] > src[best]) best = idx;
            }
          const std::size_t o = y.index(b, ch, t, f);
          y.data[o] = src[best];
          argmax_[o] = x.index(b, ch, 0, 0) + best;
        }
    }
  return y;
}

template <typename T>
Tensor4<T> MaxPool2d<T>::backward(const Tensor4<T>& dy) {
  if (dy.size() != argmax_.size()) throw std::invalid_argument("MaxPool2d::backward: shape mismatch");
  Tensor4<T> dx(in_n_, in_c_, in_t_, in_f_);
  for (std::size_t o = 0; o < dy.size(); ++o) dx.data[argmax_[o]] += dy.data[o];
  return dx;
}

// ---------------------------------------------------------------------------
// Linear

template <typename T>
Linear<T>::Linear(const std::string& name, int in_features, int out_features, Rng& rng)
    : weight(name + ".weight", {out_features, in_features}),
      bias(name + ".bias", {out_features}),
      in_(in_features),
      out_(out_features) {
  if (in_features <= 0 || out_features <= 0) throw std::invalid_argument("Linear: feature counts must be positive");
  uniform_fill(weight.value, std::sqrt(6.0 / (in_features + out_features)), rng);
}

template <typename T>
MatrixX<T> Linear<T>::forward(const MatrixX<T>& x) {
  if (x.cols() != in_)
    throw std::invalid_argument("Linear: expected " + std::to_string(in_) + " features, got " + std::to_string(x.cols()));
  x_ = x;
  ConstMatrixMap<T> w(weight.value.data(), out_, in_);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.value.data(), out_);
  MatrixX<T> y = x * w.transpose();
  y.rowwise() += b;
  return y;
}

template <typename T>
MatrixX<T> Linear<T>::backward(const MatrixX<T>& dy) {
  if (dy.cols() != out_ || dy.rows() != x_.rows()) throw std::invalid_argument("Linear::backward: shape mismatch");
  ConstMatrixMap<T> w(weight.value.data(), out_, in_);
  MatrixMap<T> gw(weight.grad.data(), out_, in_);
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(bias.grad.data(), out_);
  gw.noalias() += dy.transpose() * x_;
  gb += dy.colwise().sum();
  return dy * w;
}

// ---------------------------------------------------------------------------
// ChannelSE

template <typename T>
ChannelSE<T>::ChannelSE(const std::string& name, int channels, int ratio, Rng& rng) : channels_(channels) {
  if (ratio <= 0 || channels % ratio != 0)
    throw std::invalid_argument("ChannelSE: ratio " + std::to_string(ratio) + " does not divide " +
                                std::to_string(channels) + " channels");
  hidden_ = channels / ratio;
  w1 = Param<T>(name + ".fc1.weight", {hidden_, channels});
  b1 = Param<T>(name + ".fc1.bias", {hidden_});
  w2 = Param<T>(name + ".fc2.weight", {channels, hidden_});
  b2 = Param<T>(name + ".fc2.bias", {channels});
  uniform_fill(w1.value, std::sqrt(6.0 / (channels + hidden_)), rng);
  uniform_fill(w2.value, std::sqrt(6.0 / (channels + hidden_)), rng);
}

template <typename T>
Tensor4<T> ChannelSE<T>::forward(const Tensor4<T>& x) {
  require_channels(x, channels_, "ChannelSE");
  x_ = x;
  const std::size_t plane = x.plane();
  squeeze_.resize(x.n, channels_);
  for (int b = 0; b < x.n; ++b)
    for (int ch = 0; ch < channels_; ++ch) {
      const T* p = x.channel(b, ch);
      const double s = lane_sum(plane, [p](std::size_t i) { return static_cast<double>(p[i]); });
      squeeze_(b, ch) = static_cast<T>(s / static_cast<double>(plane));
    }
  ConstMatrixMap<T> W1(w1.value.data(), hidden_, channels_);
  ConstMatrixMap<T> W2(w2.value.data(), channels_, hidden_);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> B1(b1.value.data(), hidden_);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> B2(b2.value.data(), channels_);
  pre1_ = squeeze_ * W1.transpose();
  pre1_.rowwise() += B1;
  hidden_act_ = pre1_.cwiseMax(T(0));
  gate_ = hidden_act_ * W2.transpose();
  gate_.rowwise() += B2;
  gate_ = gate_.unaryExpr([](T v) { return sigmoid(v); });

  Tensor4<T> y(x.n, x.c, x.t, x.f);
  for (int b = 0; b < x.n; ++b)
    for (int ch = 0; ch < channels_; ++ch) {
      const T g = gate_(b, ch);
      const T* p = x.channel(b, ch);
      T* o = y.channel(b, ch);
      for (std::size_t i = 0; i < plane; ++i) o[i] = p[i] * g;
    }
  return y;
}

template <typename T>
Tensor4<T> ChannelSE<T>::backward(const Tensor4<T>& dy) {
  if (!dy.same_shape(x_)) throw std::invalid_argument("ChannelSE::backward: shape mismatch");
  const std::size_t plane = dy.plane();
  MatrixX<T> dgate(dy.n, channels_);
  Tensor4<T> dx(dy.n, dy.c, dy.t, dy.f);
  for (int b = 0; b < dy.n; ++b)
    for (int ch = 0; ch < channels_; ++ch) {
      const T* g = dy.channel(b, ch);
      const T* p = x_.channel(b, ch);
      T* d = dx.channel(b, ch);
      const T gate = gate_(b, ch);
      for (std::size_t i = 0; i < plane; ++i) d[i] = g[i] * gate;
      const double s = lane_sum(plane, [g, p](std::size_t i) { return static_cast<double>(g[i]) * p[i]; });
      dgate(b, ch) = static_cast<T>(s);
    }
  ConstMatrixMap<T> W1(w1.value.data(), hidden_, channels_);
  ConstMatrixMap<T> W2(w2.value.data(), channels_, hidden_);
  const MatrixX<T> dpre2 = dgate.cwiseProduct(gate_.unaryExpr([](T s) { return s * (T(1) - s); }));
  MatrixMap<T>(w2.grad.data(), channels_, hidden_).noalias() += dpre2.transpose() * hidden_act_;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(b2.grad.data(), channels_) += dpre2.colwise().sum();
  const MatrixX<T> dhidden = dpre2 * W2;
  const MatrixX<T> dpre1 = dhidden.cwiseProduct(pre1_.unaryExpr([](T v) { return v > T(0) ? T(1) : T(0); }));
  MatrixMap<T>(w1.grad.data(), hidden_, channels_).noalias() += dpre1.transpose() * squeeze_;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(b1.grad.data(), hidden_) += dpre1.colwise().sum();
  const MatrixX<T> dsqueeze = dpre1 * W1;
  const T inv_plane = T(1) / static_cast<T>(plane);
  for (int b = 0; b < dy.n; ++b)
    for (int ch = 0; ch < channels_; ++ch) {
      const T add = dsqueeze(b, ch) * inv_plane;
      T* d = dx.channel(b, ch);
      for (std::size_t i = 0; i < plane; ++i) d[i] += add;
    }
  return dx;
}

// ---------------------------------------------------------------------------
// SpatialSE

template <typename T>
SpatialSE<T>::SpatialSE(const std::string& name, int channels, Rng& rng)
    : weight(name + ".weight", {1, channels, 1, 1}), bias(name + ".bias", {1}), channels_(channels) {
  uniform_fill(weight.value, std::sqrt(6.0 / channels), rng);
}

template <typename T>
Tensor4<T> SpatialSE<T>::forward(const Tensor4<T>& x) {
  require_channels(x, channels_, "SpatialSE");
  x_ = x;
  const std::size_t plane = x.plane();
  gate_ = Tensor4<T>(x.n, 1, x.t, x.f, bias.value[0]);
  for (int b = 0; b < x.n; ++b) {
    T* q = gate_.channel(b, 0);
    for (int ch = 0; ch < channels_; ++ch) {
      const T w = weight.value[ch];
      const T* p = x.channel(b, ch);
      for (std::size_t i = 0; i < plane; ++i) q[i] += w * p[i];
    }
    for (std::size_t i = 0; i < plane; ++i) q[i] = sigmoid(q[i]);
  }
  Tensor4<T> y(x.n, x.c, x.t, x.f);
  for (int b = 0; b < x.n; ++b) {
    const T* q = gate_.channel(b, 0);
    for (int ch = 0; ch < channels_; ++ch) {
      const T* p = x.channel(b, ch);
      T* o = y.channel(b, ch);
      for (std::size_t i = 0; i < plane; ++i) o[i] = p[i] * q[i];
    }
  }
  return y;
}

template <typename T>
Tensor4<T> SpatialSE<T>::backward(const Tensor4<T>& dy) {
  if (!dy.same_shape(x_)) throw std::invalid_argument("SpatialSE::backward: shape mismatch");
  const std::size_t plane = dy.plane();
  Tensor4<T> dx(dy.n, dy.c, dy.t, dy.f);
  std::vector<T> dpre(plane);
  double dbias = 0.0;
  for (int b = 0; b < dy.n; ++b) {
    const T* q = gate_.channel(b, 0);
    std::fill(dpre.begin(), dpre.end(), T(0));
    for (int ch = 0; ch < channels_; ++ch) {
      const T* g = dy.channel(b, ch);
      const T* p = x_.channel(b, ch);
      T* d = dx.channel(b, ch);
      for (std::size_t i = 0; i < plane; ++i) {
        dpre[i] += g[i] * p[i];
        d[i] = g[i] * q[i];
      }
    }
    for (std::size_t i = 0; i < plane; ++i) dpre[i] *= q[i] * (T(1) - q[i]);
    const T* dp = dpre.data();
    dbias += lane_sum(plane, [dp](std::size_t i) { return static_cast<double>(dp[i]); });
    for (int ch = 0; ch < channels_; ++ch) {
      const T w = weight.value[ch];
      const T* p = x_.channel(b, ch);
      T* d = dx.channel(b, ch);
      for (std::size_t i = 0; i < plane; ++i) d[i] += dpre[i] * w;
      const double gw = lane_sum(plane, [dp, p](std::size_t i) { return static_cast<double>(dp[i]) * p[i]; });
      weight.grad[ch] += static_cast<T>(gw);
    }
  }
  bias.grad[0] += static_cast<T>(dbias);
  return dx;
}

// ---------------------------------------------------------------------------
// ScSE

template <typename T>
ScSE<T>::ScSE(const std::string& name, int channels, int ratio, MergeOp merge, Rng& rng)
    : cse(name + ".cse", channels, ratio, rng), sse(name + ".sse", channels, rng), merge_(merge) {}

template <typename T>
Tensor4<T> ScSE<T>::forward(const Tensor4<T>& x) {
  Tensor4<T> a = cse.forward(x);
  const Tensor4<T> s = sse.forward(x);
  if (merge_ == MergeOp::Add) {
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += s.data[i];
    return a;
  }
  cse_wins_.assign(a.size(), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.data[i] >= s.data[i])
      cse_wins_[i] = 1;
    else
      a.data[i] = s.data[i];
  }
  return a;
}

template <typename T>
Tensor4<T> ScSE<T>::backward(const Tensor4<T>& dy) {
  if (merge_ == MergeOp::Add) {
    Tensor4<T> dx = cse.backward(dy);
    const Tensor4<T> ds = sse.backward(dy);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += ds.data[i];
    return dx;
  }
  Tensor4<T> dc = dy, ds = dy;
  for (std::size_t i = 0; i < dy.size(); ++i) (cse_wins_[i] ? ds.data[i] : dc.data[i]) = T(0);
  Tensor4<T> dx = cse.backward(dc);
  const Tensor4<T> dsx = sse.backward(ds);
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dsx.data[i];
  return dx;
}

// ---------------------------------------------------------------------------
// ConvStandardPost

template <typename T>
ConvStandardPost<T>::ConvStandardPost(const std::string& name, int in_channels, int filters, int ratio, MergeOp merge,
                                      bool use_scse, Rng& rng)
    : conv1(name + ".conv1", in_channels, filters, 3, 3, rng),
      conv2(name + ".conv2", filters, filters, 3, 3, rng),
      bn1(name + ".bn1", filters),
      bn2(name + ".bn2", filters),
      scse(name + ".scse", filters, ratio, merge, rng),
      projection_(in_channels != filters),
      use_scse_(use_scse) {
  if (projection_) {
    conv_proj = Conv2d<T>(name + ".proj", in_channels, filters, 1, 1, rng);
    bn_proj = BatchNorm2d<T>(name + ".proj_bn", filters);
  }
}

template <typename T>
void ConvStandardPost<T>::collect(ParamRefs<T>& out) {
  conv1.collect(out);
  bn1.collect(out);
  conv2.collect(out);
  bn2.collect(out);
  if (projection_) {
    conv_proj.collect(out);
    bn_proj.collect(out);
  }
  if (use_scse_) scse.collect(out);
}

template <typename T>
Tensor4<T> ConvStandardPost<T>::forward(const Tensor4<T>& x, Mode mode) {
  pre_relu1_ = bn1.forward(conv1.forward(x), mode);
  Tensor4<T> h = pre_relu1_;
  for (T& v : h.data) v = std::max(v, T(0));
  Tensor4<T> sum = bn2.forward(conv2.forward(h), mode);
  if (projection_) {
    const Tensor4<T> shortcut = bn_proj.forward(conv_proj.forward(x), mode);
    for (std::size_t i = 0; i < sum.size(); ++i) sum.data[i] += shortcut.data[i];
  } else {
    for (std::size_t i = 0; i < sum.size(); ++i) sum.data[i] += x.data[i];
  }
  pre_relu_out_ = sum;
  for (T& v : sum.data) v = std::max(v, T(0));
  return use_scse_ ? scse.forward(sum) : sum;
}

template <typename T>
Tensor4<T> ConvStandardPost<T>::backward(const Tensor4<T>& dy, bool need_input_grad) {
  Tensor4<T> dsum = use_scse_ ? scse.backward(dy) : dy;
  for (std::size_t i = 0; i < dsum.size(); ++i)
    dsum.data[i] = pre_relu_out_.data[i] > T(0) ? dsum.data[i] : T(0);

  Tensor4<T> dh = conv2.backward(bn2.backward(dsum));
  for (std::size_t i = 0; i < dh.size(); ++i)
    dh.data[i] = pre_relu1_.data[i] > T(0) ? dh.data[i] : T(0);
  Tensor4<T> dx = conv1.backward(bn1.backward(dh), need_input_grad);

  if (projection_) {
    const Tensor4<T> dshort = conv_proj.backward(bn_proj.backward(dsum), need_input_grad);
    if (need_input_grad)
      for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dshort.data[i];
  } else if (need_input_grad) {
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dsum.data[i];
  }
  return dx;
}

template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class MaxPool2d<float>;
template class MaxPool2d<double>;
template class Linear<float>;
template class Linear<double>;
template class ChannelSE<float>;
template class ChannelSE<double>;
template class SpatialSE<float>;
template class SpatialSE<double>;
template class ScSE<float>;
template class ScSE<double>;
template class ConvStandardPost<float>;
template class ConvStandardPost<double>;

}  // namespace seld::nn
