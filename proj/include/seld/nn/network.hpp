#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "seld/accdoa.hpp"
#include "seld/nn/gru.hpp"
#include "seld/nn/layers.hpp"

namespace seld::nn {

struct NetworkConfig {
  static constexpr int kBlocks = 3;

  int input_channels = 10;
  int input_bins = 64;
  int filters = 64;
  int ratio = 1;
  int num_classes = kDefaultClasses;
  std::array<int, kBlocks> time_pools{5, 1, 1};
  std::array<int, kBlocks> freq_pools{4, 4, 2};
  int rnn_units = 128;
  int rnn_layers = 2;
  int fc_units = 128;
  MergeOp merge = MergeOp::Add;
  bool use_scse = true;
  std::uint64_t seed = 0;

  void validate() const;
  int time_reduction() const;
  int freq_reduction() const;
  /// Features per step entering the recurrent stack.
  int rnn_input_size() const { return filters * (input_bins / freq_reduction()); }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Network output or target: batch x frames x classes x 3, row-major.
template <typename T>
struct AccdoaBatch {
  int batch = 0;
  int frames = 0;
  int classes = 0;
  std::vector<T> data;

  AccdoaBatch() = default;
  AccdoaBatch(int b, int f, int k) : batch(b), frames(f), classes(k), data(static_cast<std::size_t>(b) * f * k * 3) {}
  T& at(int b, int f, int k, int axis) { return data[((static_cast<std::size_t>(b) * frames + f) * classes + k) * 3 + axis]; }
  T at(int b, int f, int k, int axis) const {
    return data[((static_cast<std::size_t>(b) * frames + f) * classes + k) * 3 + axis];
  }
  bool same_shape(const AccdoaBatch& o) const { return batch == o.batch && frames == o.frames && classes == o.classes; }

  /// Frames of one batch item, widened to double.
  std::vector<AccdoaFrame> item_frames(int b) const;
  static AccdoaBatch stack(const std::vector<const std::vector<AccdoaFrame>*>& items);
};

/// Mean squared error over every element plus its gradient w.r.t. pred.
template <typename T>
struct LossResult {
  double loss = 0.0;
  AccdoaBatch<T> grad;
};

template <typename T>
LossResult<T> accdoa_mse_loss(const AccdoaBatch<T>& pred, const AccdoaBatch<T>& target);

/// Convolutional-recurrent SELD network with ACCDOA output:
///   3 x [ConvStandardPost -> max-pool(time_pools[i] x freq_pools[i])]
///   -> per-step flatten (channels * freq) -> rnn_layers x BiGRU
///   -> dense(fc_units) -> dense(3K) -> tanh.
/// An instance caches activations of its last forward pass, so it serves
/// one forward/backward at a time.
template <typename T>
class SeldNet {
 public:
  explicit SeldNet(const NetworkConfig& cfg);

  const NetworkConfig& config() const { return cfg_; }

  AccdoaBatch<T> forward(const Tensor4<T>& x, Mode mode);
  /// Backpropagates dL/d(output) and accumulates parameter gradients.
  /// Returns dL/dx when need_input_grad is set.
  Tensor4<T> backward(const AccdoaBatch<T>& d_out, bool need_input_grad = false);

  /// Every parameter, in a stable order; names are unique.
  ParamRefs<T> parameters();
  Param<T>* find(const std::string& name);
  void zero_grad();

 private:
  NetworkConfig cfg_;
  std::vector<ConvStandardPost<T>> blocks_;
  std::vector<MaxPool2d<T>> pools_;
  std::vector<BiGru<T>> rnns_;
  Linear<T> fc_, out_;
  MatrixX<T> out_act_;
  int pooled_c_ = 0, pooled_t_ = 0, pooled_f_ = 0, batch_ = 0;
};

/// Flattened view over a set of parameters for coordinate-wise access.
template <typename T>
class FlatParams {
 public:
  explicit FlatParams(ParamRefs<T> params);
  std::size_t size() const { return total_; }
  T& value(std::size_t i);
  T grad(std::size_t i) const;
  std::string describe(std::size_t i) const;

 private:
  std::pair<std::size_t, std::size_t> locate(std::size_t i) const;
  ParamRefs<T> params_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

}  // namespace seld::nn
