#include "seld/nn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

namespace seld::nn {

void TrainSchedule::validate() const {
  if (!(initial_lr > 0.0)) throw std::invalid_argument("initial learning rate must be positive");
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) throw std::invalid_argument("decay factor must lie in (0, 1)");
  if (patience_decay <= 0 || patience_stop <= patience_decay)
    throw std::invalid_argument("patience values must satisfy 0 < patience_decay < patience_stop");
  if (batch_size <= 0) throw std::invalid_argument("batch size must be positive");
  if (max_epochs <= 0) throw std::invalid_argument("max epochs must be positive");
  if (max_seconds < 0.0) throw std::invalid_argument("time budget must be non-negative");
}

PlateauController::PlateauController(const TrainSchedule& sched)
    : sched_(sched), lr_(sched.initial_lr), best_(std::numeric_limits<double>::infinity()) {
  sched_.validate();
}

PlateauController::Action PlateauController::observe(double score) {
  if (!seen_ || score < best_) {
    seen_ = true;
    best_ = score;
    stale_ = 0;
    return Action::Improved;
  }
  ++stale_;
  if (stale_ >= sched_.patience_stop) return Action::Stop;
  if (stale_ % sched_.patience_decay == 0) {
    lr_ *= sched_.decay_factor;
    return Action::Decayed;
  }
  return Action::Stale;
}

TrainResult run_schedule(TrainableModel& model, const TrainSchedule& sched, const EpochCallback& on_epoch) {
  PlateauController ctl(sched);
  TrainResult result;
  const auto start = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= sched.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = ctl.lr();
    rec.train_loss = model.train_epoch(rec.lr, epoch);
    const ValidationResult val = model.validate();
    rec.val_loss = val.loss;
    rec.val = val.metrics;
    rec.seld_score = val.metrics.seld_score();
    const PlateauController::Action action = ctl.observe(rec.seld_score);
    if (action == PlateauController::Action::Improved) {
      result.best_epoch = epoch;
      result.best_score = rec.seld_score;
      model.save_best();
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (action == PlateauController::Action::Stop) {
      result.stop_reason = "no improvement in " + std::to_string(sched.patience_stop) + " epochs";
      return result;
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (sched.max_seconds > 0.0 && elapsed >= sched.max_seconds && epoch < sched.max_epochs) {
      result.stop_reason = "time budget exhausted";
      return result;
    }
  }
  result.stop_reason = "reached max epochs";
  return result;
}

template <typename T>
Tensor4<T> stack_features(const std::vector<const Sample*>& items) {
  if (items.empty()) throw std::invalid_argument("stack_features: empty batch");
  const FeatureTensor& first = items.front()->features;
  Tensor4<T> x(static_cast<int>(items.size()), first.channels, first.frames, first.bins);
  for (std::size_t b = 0; b < items.size(); ++b) {
    const FeatureTensor& ft = items[b]->features;
    if (ft.channels != first.channels || ft.frames != first.frames || ft.bins != first.bins)
      throw std::invalid_argument("stack_features: samples differ in shape (" + items[b]->name + ")");
    std::transform(ft.data.begin(), ft.data.end(), x.data.begin() + static_cast<std::ptrdiff_t>(b * ft.data.size()),
                   [](float v) { return static_cast<T>(v); });
  }
  return x;
}

namespace {

template <typename T>
AccdoaBatch<T> stack_targets(const std::vector<const Sample*>& items) {
  std::vector<const std::vector<AccdoaFrame>*> frames;
  for (const Sample* s : items) frames.push_back(&s->targets);
  return AccdoaBatch<T>::stack(frames);
}

template <typename T>
void check_label_frames(const SeldNet<T>& net, const Sample& s) {
  const int expected = s.features.frames / net.config().time_reduction();
  if (static_cast<int>(s.targets.size()) != expected)
    throw std::invalid_argument("sample " + s.name + " has " + std::to_string(s.targets.size()) +
                                " label frames but its features map to " + std::to_string(expected));
}

}  // namespace

template <typename T>
Evaluation<T> evaluate(SeldNet<T>& net, const std::vector<Sample>& data, const EvalOptions& opts) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  Evaluation<T> ev;
  MetricCounts counts;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(opts.batch_size)) {
    std::vector<const Sample*> batch;
    for (std::size_t i = start; i < std::min(data.size(), start + opts.batch_size); ++i) {
      check_label_frames(net, data[i]);
      batch.push_back(&data[i]);
    }
    const AccdoaBatch<T> pred = net.forward(stack_features<T>(batch), Mode::Eval);
    loss_sum += accdoa_mse_loss(pred, stack_targets<T>(batch)).loss * static_cast<double>(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      EventList decoded = decode(pred.item_frames(static_cast<int>(b)), opts.decode);
      counts += score_segments(batch[b]->reference, decoded, opts.threshold).counts;
      ev.predictions.push_back(std::move(decoded));
    }
  }
  ev.loss = loss_sum / static_cast<double>(data.size());
  ev.metrics = finalize_report(counts);
  return ev;
}

template <typename T>
SeldTrainer<T>::SeldTrainer(SeldNet<T>& net, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                            const TrainSchedule& sched, EvalOptions eval)
    : net_(net), train_(train_set), val_(val_set), sched_(sched), eval_(eval), adam_(net.parameters()) {
  sched_.validate();
  if (train_.empty()) throw std::invalid_argument("training set is empty");
  if (val_.empty()) throw std::invalid_argument("validation set is empty");
  for (const Sample& s : train_) check_label_frames(net_, s);
  for (const Sample& s : val_) check_label_frames(net_, s);
}

template <typename T>
double SeldTrainer<T>::train_epoch(double lr, int epoch) {
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(sched_.seed * 1000003ull + static_cast<std::uint64_t>(epoch));
  std::shuffle(order.begin(), order.end(), rng);

  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(sched_.batch_size)) {
    std::vector<const Sample*> batch;
    for (std::size_t i = start; i < std::min(order.size(), start + sched_.batch_size); ++i)
      batch.push_back(&train_[order[i]]);
    net_.zero_grad();
    const AccdoaBatch<T> pred = net_.forward(stack_features<T>(batch), Mode::Train);
    const LossResult<T> loss = accdoa_mse_loss(pred, stack_targets<T>(batch));
    net_.backward(loss.grad);
    adam_.step(lr);
    loss_sum += loss.loss * static_cast<double>(batch.size());
  }
  return loss_sum / static_cast<double>(train_.size());
}

template <typename T>
ValidationResult SeldTrainer<T>::validate() {
  const Evaluation<T> ev = evaluate(net_, val_, eval_);
  return {ev.loss, ev.metrics};
}

template <typename T>
void SeldTrainer<T>::save_best() {
  best_.clear();
  for (Param<T>* p : net_.parameters()) best_.push_back(p->value);
}

template <typename T>
void SeldTrainer<T>::restore_best() {
  if (best_.empty()) return;
  const ParamRefs<T> params = net_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_[i];
}

template <typename T>
TrainResult train(SeldNet<T>& net, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainSchedule& sched, const EpochCallback& on_epoch) {
  SeldTrainer<T> trainer(net, train_set, val_set, sched);
  TrainResult result = run_schedule(trainer, sched, on_epoch);
  trainer.restore_best();
  return result;
}

std::string training_log_header() { return "epoch,lr,train_loss,val_loss,val_ER,val_F,val_LE,val_LR,seld_score"; }

std::string training_log_row(const EpochRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.6g,%.6f,%.6f,%.4f,%.4f,%.3f,%.4f,%.5f", r.epoch, r.lr, r.train_loss, r.val_loss,
                r.val.er20, r.val.f20, r.val.le_cd, r.val.lr_cd, r.seld_score);
  return buf;
}

template Tensor4<float> stack_features<float>(const std::vector<const Sample*>&);
template Tensor4<double> stack_features<double>(const std::vector<const Sample*>&);
template Evaluation<float> evaluate<float>(SeldNet<float>&, const std::vector<Sample>&, const EvalOptions&);
template Evaluation<double> evaluate<double>(SeldNet<double>&, const std::vector<Sample>&, const EvalOptions&);
template class SeldTrainer<float>;
template class SeldTrainer<double>;
template TrainResult train<float>(SeldNet<float>&, const std::vector<Sample>&, const std::vector<Sample>&,
                                  const TrainSchedule&, const EpochCallback&);
template TrainResult train<double>(SeldNet<double>&, const std::vector<Sample>&, const std::vector<Sample>&,
                                   const TrainSchedule&, const EpochCallback&);

}  // namespace seld::nn
