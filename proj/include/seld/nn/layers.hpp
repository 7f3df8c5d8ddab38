#pragma once

#include <random>
#include <string>
#include <vector>

#include "seld/nn/tensor.hpp"

namespace seld::nn {

using Rng = std::mt19937_64;

/// 2-D cross-correlation with "same" zero padding (odd kernels only).
/// Weight layout: out x in x kh x kw.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel_t, int kernel_f, Rng& rng);

  Tensor4<T> forward(const Tensor4<T>& x);
  /// Accumulates parameter gradients; returns dL/dx unless need_input_grad
  /// is false, in which case an empty tensor is returned.
  Tensor4<T> backward(const Tensor4<T>& dy, bool need_input_grad = true);
  void collect(ParamRefs<T>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Param<T> weight, bias;

 private:
  int in_ = 0, out_ = 0, kt_ = 1, kf_ = 1;
  Tensor4<T> x_;
};

/// Per-channel normalization over (batch, time, freq).
/// Running statistics follow r <- (1 - momentum) r + momentum * batch_stat
/// with the unbiased batch variance.
template <typename T>
class BatchNorm2d {
 public:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEps = 1e-5;

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, int channels);

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode);
  Tensor4<T> backward(const Tensor4<T>& dy);
  void collect(ParamRefs<T>& out) {
    out.push_back(&scale);
    out.push_back(&shift);
    out.push_back(&running_mean);
    out.push_back(&running_var);
  }

  Param<T> scale, shift, running_mean, running_var;

 private:
  Mode mode_ = Mode::Eval;
  Tensor4<T> xhat_;
  std::vector<T> inv_std_;
};

template <typename T>
class MaxPool2d {
 public:
  MaxPool2d() = default;
  MaxPool2d(int pool_t, int pool_f) : pt_(pool_t), pf_(pool_f) {}

  /// Output is floor(t / pool_t) x floor(f / pool_f); trailing rows that do
  /// not fill a window are dropped.
  Tensor4<T> forward(const Tensor4<T>& x);
  Tensor4<T> backward(const Tensor4<T>& dy);

 private:
  int pt_ = 1, pf_ = 1;
  std::vector<std::size_t> argmax_;
  int in_n_ = 0, in_c_ = 0, in_t_ = 0, in_f_ = 0;
};

/// y = x W^T + b on row vectors. Weight layout: out x in.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in_features, int out_features, Rng& rng);

  MatrixX<T> forward(const MatrixX<T>& x);
  MatrixX<T> backward(const MatrixX<T>& dy);
  void collect(ParamRefs<T>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
  int in_features() const { return in_; }
  int out_features() const { return out_; }

  Param<T> weight, bias;

 private:
  int in_ = 0, out_ = 0;
  MatrixX<T> x_;
};

/// Channel squeeze-excitation: global average pool over (time, freq),
/// dense C -> C/ratio, ReLU, dense C/ratio -> C, sigmoid, per-channel gate.
template <typename T>
class ChannelSE {
 public:
  ChannelSE() = default;
  ChannelSE(const std::string& name, int channels, int ratio, Rng& rng);

  Tensor4<T> forward(const Tensor4<T>& x);
  Tensor4<T> backward(const Tensor4<T>& dy);
  void collect(ParamRefs<T>& out) {
    out.push_back(&w1);
    out.push_back(&b1);
    out.push_back(&w2);
    out.push_back(&b2);
  }
  /// Gates of the last forward pass, batch x channels.
  const MatrixX<T>& gates() const { return gate_; }
  int bottleneck() const { return hidden_; }

  Param<T> w1, b1, w2, b2;

 private:
  int channels_ = 0, hidden_ = 0;
  Tensor4<T> x_;
  MatrixX<T> squeeze_, pre1_, hidden_act_, gate_;
};

/// Spatial squeeze-excitation: 1x1 convolution C -> 1, sigmoid, gate every
/// channel at each (time, freq) position.
template <typename T>
class SpatialSE {
 public:
  SpatialSE() = default;
  SpatialSE(const std::string& name, int channels, Rng& rng);

  Tensor4<T> forward(const Tensor4<T>& x);
  Tensor4<T> backward(const Tensor4<T>& dy);
  void collect(ParamRefs<T>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
  /// Gates of the last forward pass, batch x 1 x time x freq.
  const Tensor4<T>& gates() const { return gate_; }

  Param<T> weight, bias;

 private:
  int channels_ = 0;
  Tensor4<T> x_;
  Tensor4<T> gate_;
};

/// How the channel and spatial branches of scSE are combined.
enum class MergeOp { Add, Max };

template <typename T>
class ScSE {
 public:
  ScSE() = default;
  ScSE(const std::string& name, int channels, int ratio, MergeOp merge, Rng& rng);

  Tensor4<T> forward(const Tensor4<T>& x);
  Tensor4<T> backward(const Tensor4<T>& dy);
  void collect(ParamRefs<T>& out) {
    cse.collect(out);
    sse.collect(out);
  }

  ChannelSE<T> cse;
  SpatialSE<T> sse;

 private:
  MergeOp merge_ = MergeOp::Add;
  std::vector<unsigned char> cse_wins_;
};

/// Residual block with squeeze-excitation after the sum:
///   main     = BN(conv3x3(ReLU(BN(conv3x3(x)))))
///   shortcut = x, or BN(conv1x1(x)) when the channel count changes
///   out      = scSE(ReLU(main + shortcut))
/// With use_scse = false the gate is skipped (plain residual block).
template <typename T>
class ConvStandardPost {
 public:
  ConvStandardPost() = default;
  ConvStandardPost(const std::string& name, int in_channels, int filters, int ratio, MergeOp merge, bool use_scse,
                   Rng& rng);

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode);
  Tensor4<T> backward(const Tensor4<T>& dy, bool need_input_grad = true);
  void collect(ParamRefs<T>& out);
  bool has_projection() const { return projection_; }

  Conv2d<T> conv1, conv2, conv_proj;
  BatchNorm2d<T> bn1, bn2, bn_proj;
  ScSE<T> scse;

 private:
  bool projection_ = false;
  bool use_scse_ = true;
  Tensor4<T> pre_relu1_, pre_relu_out_;
};

}  // namespace seld::nn
