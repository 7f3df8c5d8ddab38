#pragma once

#include <string>
#include <vector>

#include "seld/nn/layers.hpp"

namespace seld::nn {

/// Batched sequences stored as a (batch * steps) x features matrix;
/// row b * steps + t holds step t of sequence b.
template <typename T>
struct SequenceBatch {
  int batch = 0;
  int steps = 0;
  MatrixX<T> values;

  int features() const { return static_cast<int>(values.cols()); }
};

/// One direction of a gated recurrent unit layer:
///   r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
///   z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
///   n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
///   h' = (1 - z) * n + z * h
/// Gate blocks are stacked (r, z, n) along the rows of w_ih / w_hh.
/// The initial hidden state is zero.
template <typename T>
class Gru {
 public:
  Gru() = default;
  Gru(const std::string& name, int input_size, int hidden_size, bool reverse, Rng& rng);

  SequenceBatch<T> forward(const SequenceBatch<T>& x);
  SequenceBatch<T> backward(const SequenceBatch<T>& dy);
  void collect(ParamRefs<T>& out) {
    out.push_back(&w_ih);
    out.push_back(&w_hh);
    out.push_back(&b_ih);
    out.push_back(&b_hh);
  }
  int hidden_size() const { return hidden_; }

  Param<T> w_ih, w_hh, b_ih, b_hh;

 private:
  int input_ = 0, hidden_ = 0;
  bool reverse_ = false;
  SequenceBatch<T> x_;
  // Per processed step (in processing order), batch x hidden.
  std::vector<MatrixX<T>> h_prev_, r_, z_, n_, hn_;
};

/// Forward and reverse GRUs over the same input; outputs are concatenated
/// per step as [forward | reverse].
template <typename T>
class BiGru {
 public:
  BiGru() = default;
  BiGru(const std::string& name, int input_size, int hidden_size, Rng& rng);

  SequenceBatch<T> forward(const SequenceBatch<T>& x);
  SequenceBatch<T> backward(const SequenceBatch<T>& dy);
  void collect(ParamRefs<T>& out) {
    fwd.collect(out);
    bwd.collect(out);
  }
  int output_size() const { return 2 * fwd.hidden_size(); }

  Gru<T> fwd, bwd;
};

}  // namespace seld::nn
