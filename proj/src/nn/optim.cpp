#include "seld/nn/optim.hpp"

#include <cmath>

namespace seld::nn {

template <typename T>
Adam<T>::Adam(const ParamRefs<T>& params, AdamConfig cfg) : cfg_(cfg) {
  for (Param<T>* p : params) {
    if (!p->trainable) continue;
    slots_.push_back({p, std::vector<T>(p->size(), T(0)), std::vector<T>(p->size(), T(0))});
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T step_size = static_cast<T>(lr / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T eps = static_cast<T>(cfg_.eps);
  for (Slot& s : slots_) {
    T* w = s.param->value.data();
    const T* g = s.param->grad.data();
    for (std::size_t i = 0; i < s.m.size(); ++i) {
      s.m[i] = b1 * s.m[i] + (T(1) - b1) * g[i];
      s.v[i] = b2 * s.v[i] + (T(1) - b2) * g[i] * g[i];
      // lr * m_hat / (sqrt(v_hat) + eps)
      w[i] -= step_size * s.m[i] / (std::sqrt(s.v[i]) * inv_sqrt_c2 + eps);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace seld::nn
