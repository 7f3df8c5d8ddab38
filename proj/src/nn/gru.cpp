#include "seld/nn/gru.hpp"

#include <cmath>
#include <stdexcept>

namespace seld::nn {

template <typename T>
Gru<T>::Gru(const std::string& name, int input_size, int hidden_size, bool reverse, Rng& rng)
    : w_ih(name + ".w_ih", {3 * hidden_size, input_size}),
      w_hh(name + ".w_hh", {3 * hidden_size, hidden_size}),
      b_ih(name + ".b_ih", {3 * hidden_size}),
      b_hh(name + ".b_hh", {3 * hidden_size}),
      input_(input_size),
      hidden_(hidden_size),
      reverse_(reverse) {
  if (input_size <= 0 || hidden_size <= 0) throw std::invalid_argument("Gru: sizes must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  std::uniform_real_distribution<double> d(-bound, bound);
  for (Param<T>* p : {&w_ih, &w_hh, &b_ih, &b_hh})
    for (T& v : p->value) v = static_cast<T>(d(rng));
}

template <typename T>
SequenceBatch<T> Gru<T>::forward(const SequenceBatch<T>& x) {
  if (x.features() != input_)
    throw std::invalid_argument("Gru: expected " + std::to_string(input_) + " input features, got " +
                                std::to_string(x.features()));
  x_ = x;
  const int H = hidden_, N = x.batch, L = x.steps;
  ConstMatrixMap<T> wi(w_ih.value.data(), 3 * H, input_);
  ConstMatrixMap<T> wh(w_hh.value.data(), 3 * H, H);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bi(b_ih.value.data(), 3 * H);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bh(b_hh.value.data(), 3 * H);

  MatrixX<T> gi = x.values * wi.transpose();
  gi.rowwise() += bi;

  SequenceBatch<T> y{N, L, MatrixX<T>(static_cast<Eigen::Index>(N) * L, H)};
  for (auto* v : {&h_prev_, &r_, &z_, &n_, &hn_}) v->assign(L, MatrixX<T>());
  MatrixX<T> h = MatrixX<T>::Zero(N, H);
  MatrixX<T> gh;
  for (int s = 0; s < L; ++s) {
    const int t = reverse_ ? L - 1 - s : s;
    gh.noalias() = h * wh.transpose();
    gh.rowwise() += bh;
    MatrixX<T> r(N, H), z(N, H), n(N, H);
    for (int b = 0; b < N; ++b) {
      const auto gx = gi.row(static_cast<Eigen::Index>(b) * L + t);
      for (int j = 0; j < H; ++j) {
        r(b, j) = sigmoid(gx(j) + gh(b, j));
        z(b, j) = sigmoid(gx(H + j) + gh(b, H + j));
        n(b, j) = std::tanh(gx(2 * H + j) + r(b, j) * gh(b, 2 * H + j));
      }
    }
    h_prev_[s] = h;
    hn_[s] = gh.rightCols(H);
    h = (T(1) - z.array()) * n.array() + z.array() * h.array();
    for (int b = 0; b < N; ++b) y.values.row(static_cast<Eigen::Index>(b) * L + t) = h.row(b);
    r_[s] = std::move(r);
    z_[s] = std::move(z);
    n_[s] = std::move(n);
  }
  return y;
}

template <typename T>
SequenceBatch<T> Gru<T>::backward(const SequenceBatch<T>& dy) {
  const int H = hidden_, N = x_.batch, L = x_.steps;
  if (dy.batch != N || dy.steps != L || dy.features() != H) throw std::invalid_argument("Gru::backward: shape mismatch");
  ConstMatrixMap<T> wi(w_ih.value.data(), 3 * H, input_);
  ConstMatrixMap<T> wh(w_hh.value.data(), 3 * H, H);
  MatrixMap<T> gwi(w_ih.grad.data(), 3 * H, input_);
  MatrixMap<T> gwh(w_hh.grad.data(), 3 * H, H);
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gbi(b_ih.grad.data(), 3 * H);
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gbh(b_hh.grad.data(), 3 * H);

  MatrixX<T> dgi(static_cast<Eigen::Index>(N) * L, 3 * H);
  MatrixX<T> dh_next = MatrixX<T>::Zero(N, H);
  MatrixX<T> dgh(N, 3 * H);
  for (int s = L - 1; s >= 0; --s) {
    const int t = reverse_ ? L - 1 - s : s;
    const MatrixX<T>& r = r_[s];
    const MatrixX<T>& z = z_[s];
    const MatrixX<T>& n = n_[s];
    const MatrixX<T>& hp = h_prev_[s];
    const MatrixX<T>& hn = hn_[s];
    MatrixX<T> dh_prev(N, H);
    for (int b = 0; b < N; ++b) {
      const Eigen::Index row = static_cast<Eigen::Index>(b) * L + t;
      for (int j = 0; j < H; ++j) {
        const T dh = dy.values(row, j) + dh_next(b, j);
        const T dn = dh * (T(1) - z(b, j));
        const T dz = dh * (hp(b, j) - n(b, j));
        dh_prev(b, j) = dh * z(b, j);
        const T dpre_n = dn * (T(1) - n(b, j) * n(b, j));
        const T dr = dpre_n * hn(b, j);
        const T dpre_r = dr * r(b, j) * (T(1) - r(b, j));
        const T dpre_z = dz * z(b, j) * (T(1) - z(b, j));
        dgi(row, j) = dpre_r;
        dgi(row, H + j) = dpre_z;
        dgi(row, 2 * H + j) = dpre_n;
        dgh(b, j) = dpre_r;
        dgh(b, H + j) = dpre_z;
        dgh(b, 2 * H + j) = dpre_n * r(b, j);
      }
    }
    gwh.noalias() += dgh.transpose() * hp;
    gbh += dgh.colwise().sum();
    dh_prev.noalias() += dgh * wh;
    dh_next = std::move(dh_prev);
  }
  gwi.noalias() += dgi.transpose() * x_.values;
  gbi += dgi.colwise().sum();
  return {N, L, dgi * wi};
}

template <typename T>
BiGru<T>::BiGru(const std::string& name, int input_size, int hidden_size, Rng& rng)
    : fwd(name + ".fwd", input_size, hidden_size, false, rng), bwd(name + ".bwd", input_size, hidden_size, true, rng) {}

template <typename T>
SequenceBatch<T> BiGru<T>::forward(const SequenceBatch<T>& x) {
  const SequenceBatch<T> a = fwd.forward(x);
  const SequenceBatch<T> b = bwd.forward(x);
  SequenceBatch<T> y{x.batch, x.steps, MatrixX<T>(a.values.rows(), a.values.cols() + b.values.cols())};
  y.values << a.values, b.values;
  return y;
}

template <typename T>
SequenceBatch<T> BiGru<T>::backward(const SequenceBatch<T>& dy) {
  const int H = fwd.hidden_size();
  SequenceBatch<T> da{dy.batch, dy.steps, dy.values.leftCols(H)};
  SequenceBatch<T> db{dy.batch, dy.steps, dy.values.rightCols(H)};
  SequenceBatch<T> dx = fwd.backward(da);
  dx.values += bwd.backward(db).values;
  return dx;
}

template class Gru<float>;
template class Gru<double>;
template class BiGru<float>;
template class BiGru<double>;

}  // namespace seld::nn
