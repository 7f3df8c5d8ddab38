#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace seld::nn {

template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<MatrixX<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const MatrixX<T>>;

/// Heap storage aligned to Eigen's packet size, so vectorised reductions
/// split the same way on every run and results are bit-reproducible.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

enum class Mode { Train, Eval };

/// Dense batch x channels x time x freq array, row-major.
template <typename T>
struct Tensor4 {
  int n = 0, c = 0, t = 0, f = 0;
  AlignedVector<T> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int t_, int f_, T fill = T(0))
      : n(n_), c(c_), t(t_), f(f_), data(static_cast<std::size_t>(n_) * c_ * t_ * f_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(t) * f; }
  std::size_t index(int b, int ch, int ti, int fi) const {
    return ((static_cast<std::size_t>(b) * c + ch) * t + ti) * f + fi;
  }
  T& at(int b, int ch, int ti, int fi) { return data[index(b, ch, ti, fi)]; }
  T at(int b, int ch, int ti, int fi) const { return data[index(b, ch, ti, fi)]; }
  T* channel(int b, int ch) { return data.data() + (static_cast<std::size_t>(b) * c + ch) * plane(); }
  const T* channel(int b, int ch) const { return data.data() + (static_cast<std::size_t>(b) * c + ch) * plane(); }
  /// The (channels x time*freq) matrix of one batch item.
  MatrixMap<T> item(int b) { return MatrixMap<T>(channel(b, 0), c, static_cast<Eigen::Index>(plane())); }
  ConstMatrixMap<T> item(int b) const {
    return ConstMatrixMap<T>(channel(b, 0), c, static_cast<Eigen::Index>(plane()));
  }
  bool same_shape(const Tensor4& o) const { return n == o.n && c == o.c && t == o.t && f == o.f; }
  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

/// A named learnable (or running-statistic) tensor with its gradient.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  AlignedVector<T> value;
  AlignedVector<T> grad;
  bool trainable = true;

  Param() = default;
  Param(std::string name_, std::vector<int> shape_, bool trainable_ = true)
      : name(std::move(name_)), shape(std::move(shape_)), trainable(trainable_) {
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    value.assign(count, T(0));
    grad.assign(count, T(0));
  }
  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
using ParamRefs = std::vector<Param<T>*>;

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace seld::nn
