#include "seld/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seld::nn {

void NetworkConfig::validate() const {
  if (input_channels != 7 && input_channels != 10 && input_channels != 17)
    throw std::invalid_argument("network input must have 7, 10 or 17 channels");
  if (filters <= 0 || num_classes <= 0 || rnn_units <= 0 || rnn_layers <= 0 || fc_units <= 0 || input_bins <= 0)
    throw std::invalid_argument("network sizes must be positive");
  if (ratio <= 0 || filters % ratio != 0)
    throw std::invalid_argument("ratio " + std::to_string(ratio) + " must divide the filter count " +
                                std::to_string(filters));
  for (int i = 0; i < kBlocks; ++i)
    if (time_pools[i] <= 0 || freq_pools[i] <= 0) throw std::invalid_argument("pool sizes must be positive");
  if (time_reduction() != kFeatureFramesPerLabel)
    throw std::invalid_argument("time pools must multiply to " + std::to_string(kFeatureFramesPerLabel) +
                                " (feature frames per label frame)");
  if (input_bins % freq_reduction() != 0)
    throw std::invalid_argument("frequency pools must divide the number of input bins");
}

int NetworkConfig::time_reduction() const {
  int r = 1;
  for (int p : time_pools) r *= p;
  return r;
}

int NetworkConfig::freq_reduction() const {
  int r = 1;
  for (int p : freq_pools) r *= p;
  return r;
}

// ---------------------------------------------------------------------------

template <typename T>
std::vector<AccdoaFrame> AccdoaBatch<T>::item_frames(int b) const {
  std::vector<AccdoaFrame> out(frames, AccdoaFrame(classes));
  for (int f = 0; f < frames; ++f)
    for (int k = 0; k < classes; ++k)
      for (int a = 0; a < 3; ++a) out[f].vectors[k][a] = static_cast<double>(at(b, f, k, a));
  return out;
}

template <typename T>
AccdoaBatch<T> AccdoaBatch<T>::stack(const std::vector<const std::vector<AccdoaFrame>*>& items) {
  if (items.empty()) throw std::invalid_argument("AccdoaBatch::stack: no items");
  const int frames = static_cast<int>(items.front()->size());
  const int classes = frames > 0 ? items.front()->front().num_classes() : 0;
  AccdoaBatch out(static_cast<int>(items.size()), frames, classes);
  for (int b = 0; b < out.batch; ++b) {
    if (static_cast<int>(items[b]->size()) != frames) throw std::invalid_argument("AccdoaBatch::stack: frame counts differ");
    for (int f = 0; f < frames; ++f) {
      const AccdoaFrame& fr = (*items[b])[f];
      if (fr.num_classes() != classes) throw std::invalid_argument("AccdoaBatch::stack: class counts differ");
      for (int k = 0; k < classes; ++k)
        for (int a = 0; a < 3; ++a) out.at(b, f, k, a) = static_cast<T>(fr.vectors[k][a]);
    }
  }
  return out;
}

template <typename T>
LossResult<T> accdoa_mse_loss(const AccdoaBatch<T>& pred, const AccdoaBatch<T>& target) {
  if (!pred.same_shape(target)) throw std::invalid_argument("accdoa_mse_loss: prediction and target shapes differ");
  LossResult<T> r;
  r.grad = AccdoaBatch<T>(pred.batch, pred.frames, pred.classes);
  const std::size_t n = pred.data.size();
  if (n == 0) return r;
  double sum = 0.0;
  const double scale = 2.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    sum += d * d;
    r.grad.data[i] = static_cast<T>(scale * d);
  }
  r.loss = sum / static_cast<double>(n);
  return r;
}

// ---------------------------------------------------------------------------

template <typename T>
SeldNet<T>::SeldNet(const NetworkConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  int channels = cfg_.input_channels;
  for (int i = 0; i < NetworkConfig::kBlocks; ++i) {
    blocks_.emplace_back("block" + std::to_string(i + 1), channels, cfg_.filters, cfg_.ratio, cfg_.merge, cfg_.use_scse,
                         rng);
    pools_.emplace_back(cfg_.time_pools[i], cfg_.freq_pools[i]);
    channels = cfg_.filters;
  }
  int width = cfg_.rnn_input_size();
  for (int i = 0; i < cfg_.rnn_layers; ++i) {
    rnns_.emplace_back("gru" + std::to_string(i + 1), width, cfg_.rnn_units, rng);
    width = 2 * cfg_.rnn_units;
  }
  fc_ = Linear<T>("fc", width, cfg_.fc_units, rng);
  out_ = Linear<T>("out", cfg_.fc_units, 3 * cfg_.num_classes, rng);
}

template <typename T>
AccdoaBatch<T> SeldNet<T>::forward(const Tensor4<T>& x, Mode mode) {
  if (x.c != cfg_.input_channels)
    throw std::invalid_argument("SeldNet: input has " + std::to_string(x.c) + " channels, network expects " +
                                std::to_string(cfg_.input_channels));
  if (x.f != cfg_.input_bins)
    throw std::invalid_argument("SeldNet: input has " + std::to_string(x.f) + " bins, network expects " +
                                std::to_string(cfg_.input_bins));
  if (x.t < cfg_.time_reduction()) throw std::invalid_argument("SeldNet: input shorter than one label frame");

  Tensor4<T> h = blocks_[0].forward(x, mode);
  h = pools_[0].forward(h);
  for (int i = 1; i < NetworkConfig::kBlocks; ++i) {
    h = blocks_[i].forward(h, mode);
    h = pools_[i].forward(h);
  }
  batch_ = h.n;
  pooled_c_ = h.c;
  pooled_t_ = h.t;
  pooled_f_ = h.f;

  SequenceBatch<T> seq{h.n, h.t, MatrixX<T>(static_cast<Eigen::Index>(h.n) * h.t, h.c * h.f)};
  for (int b = 0; b < h.n; ++b)
    for (int c = 0; c < h.c; ++c)
      for (int t = 0; t < h.t; ++t)
        for (int f = 0; f < h.f; ++f) seq.values(static_cast<Eigen::Index>(b) * h.t + t, c * h.f + f) = h.at(b, c, t, f);
  for (auto& rnn : rnns_) seq = rnn.forward(seq);

  out_act_ = out_.forward(fc_.forward(seq.values)).array().tanh().matrix();
  AccdoaBatch<T> y(h.n, h.t, cfg_.num_classes);
  std::copy(out_act_.data(), out_act_.data() + out_act_.size(), y.data.begin());
  return y;
}

template <typename T>
Tensor4<T> SeldNet<T>::backward(const AccdoaBatch<T>& d_out, bool need_input_grad) {
  if (d_out.batch != batch_ || d_out.frames != pooled_t_ || d_out.classes != cfg_.num_classes)
    throw std::invalid_argument("SeldNet::backward: gradient shape does not match the forward pass");
  MatrixX<T> d(out_act_.rows(), out_act_.cols());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const T a = out_act_.data()[i];
    d.data()[i] = d_out.data[static_cast<std::size_t>(i)] * (T(1) - a * a);
  }
  SequenceBatch<T> dseq{batch_, pooled_t_, fc_.backward(out_.backward(d))};
  for (auto it = rnns_.rbegin(); it != rnns_.rend(); ++it) dseq = it->backward(dseq);

  Tensor4<T> dh(batch_, pooled_c_, pooled_t_, pooled_f_);
  for (int b = 0; b < batch_; ++b)
    for (int c = 0; c < pooled_c_; ++c)
      for (int t = 0; t < pooled_t_; ++t)
        for (int f = 0; f < pooled_f_; ++f)
          dh.at(b, c, t, f) = dseq.values(static_cast<Eigen::Index>(b) * pooled_t_ + t, c * pooled_f_ + f);

  for (int i = NetworkConfig::kBlocks - 1; i >= 0; --i) {
    dh = pools_[i].backward(dh);
    dh = blocks_[i].backward(dh, i > 0 || need_input_grad);
  }
  return dh;
}

template <typename T>
ParamRefs<T> SeldNet<T>::parameters() {
  ParamRefs<T> out;
  for (auto& b : blocks_) b.collect(out);
  for (auto& r : rnns_) r.collect(out);
  fc_.collect(out);
  out_.collect(out);
  return out;
}

template <typename T>
Param<T>* SeldNet<T>::find(const std::string& name) {
  for (Param<T>* p : parameters())
    if (p->name == name) return p;
  return nullptr;
}

template <typename T>
void SeldNet<T>::zero_grad() {
  for (Param<T>* p : parameters()) p->zero_grad();
}

// ---------------------------------------------------------------------------

template <typename T>
FlatParams<T>::FlatParams(ParamRefs<T> params) : params_(std::move(params)) {
  for (Param<T>* p : params_) {
    offsets_.push_back(total_);
    total_ += p->size();
  }
}

template <typename T>
std::pair<std::size_t, std::size_t> FlatParams<T>::locate(std::size_t i) const {
  if (i >= total_) throw std::out_of_range("FlatParams: index out of range");
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), i);
  const std::size_t p = static_cast<std::size_t>(it - offsets_.begin()) - 1;
  return {p, i - offsets_[p]};
}

template <typename T>
T& FlatParams<T>::value(std::size_t i) {
  const auto [p, j] = locate(i);
  return params_[p]->value[j];
}

template <typename T>
T FlatParams<T>::grad(std::size_t i) const {
  const auto [p, j] = locate(i);
  return params_[p]->grad[j];
}

template <typename T>
std::string FlatParams<T>::describe(std::size_t i) const {
  const auto [p, j] = locate(i);
  return params_[p]->name + "[" + std::to_string(j) + "]";
}

template struct AccdoaBatch<float>;
template struct AccdoaBatch<double>;
template LossResult<float> accdoa_mse_loss(const AccdoaBatch<float>&, const AccdoaBatch<float>&);
template LossResult<double> accdoa_mse_loss(const AccdoaBatch<double>&, const AccdoaBatch<double>&);
template class SeldNet<float>;
template class SeldNet<double>;
template class FlatParams<float>;
template class FlatParams<double>;

}  // namespace seld::nn
