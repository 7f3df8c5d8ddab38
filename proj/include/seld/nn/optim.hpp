#pragma once

#include <vector>

#include "seld/nn/tensor.hpp"

namespace seld::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over the trainable parameters it was built
/// with. Gradients are read from Param::grad.
template <typename T>
class Adam {
 public:
  struct Slot {
    Param<T>* param = nullptr;
    std::vector<T> m, v;
  };

  explicit Adam(const ParamRefs<T>& params, AdamConfig cfg = {});

  void step(double lr);
  long steps() const { return steps_; }
  void set_steps(long s) { steps_ = s; }
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  long steps_ = 0;
};

}  // namespace seld::nn
