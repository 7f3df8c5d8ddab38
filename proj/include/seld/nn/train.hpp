#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "seld/accdoa.hpp"
#include "seld/features.hpp"
#include "seld/metrics.hpp"
#include "seld/nn/network.hpp"
#include "seld/nn/optim.hpp"

namespace seld::nn {

struct TrainSchedule {
  double initial_lr = 1e-3;
  double decay_factor = 0.5;
  int patience_decay = 15;
  int patience_stop = 30;
  int batch_size = 8;
  int max_epochs = 1000;
  /// Wall-clock budget checked after each epoch; 0 disables it.
  double max_seconds = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Plateau logic on a lower-is-better validation score. Every
/// patience_decay consecutive epochs without improvement multiply the
/// learning rate by decay_factor; patience_stop of them end training.
class PlateauController {
 public:
  enum class Action { Improved, Stale, Decayed, Stop };

  explicit PlateauController(const TrainSchedule& sched);

  Action observe(double score);
  double lr() const { return lr_; }
  int stale_epochs() const { return stale_; }
  double best_score() const { return best_; }

 private:
  TrainSchedule sched_;
  double lr_;
  double best_;
  int stale_ = 0;
  bool seen_ = false;
};

struct ValidationResult {
  double loss = 0.0;
  MetricsReport metrics;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  MetricsReport val;
  double seld_score = 0.0;
};

/// What the training loop drives: one epoch of updates, a validation pass,
/// and a snapshot of the current parameters as the best so far.
class TrainableModel {
 public:
  virtual ~TrainableModel() = default;
  virtual double train_epoch(double lr, int epoch) = 0;
  virtual ValidationResult validate() = 0;
  virtual void save_best() = 0;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  double best_score = 0.0;
  std::string stop_reason;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult run_schedule(TrainableModel& model, const TrainSchedule& sched, const EpochCallback& on_epoch = {});

/// One scene ready for the network: standardized features, ACCDOA targets
/// at the label rate, and the reference events for scoring.
struct Sample {
  std::string name;
  FeatureTensor features;
  std::vector<AccdoaFrame> targets;
  EventList reference;
};

template <typename T>
Tensor4<T> stack_features(const std::vector<const Sample*>& items);

struct EvalOptions {
  DecodeConfig decode;
  ThresholdConfig threshold;
  int batch_size = 8;
};

template <typename T>
struct Evaluation {
  double loss = 0.0;
  MetricsReport metrics;
  std::vector<EventList> predictions;
};

/// Eval-mode forward over a dataset, ACCDOA decoding and scoring against
/// each sample's reference; counts are micro-averaged over samples.
template <typename T>
Evaluation<T> evaluate(SeldNet<T>& net, const std::vector<Sample>& data, const EvalOptions& opts = {});

template <typename T>
class SeldTrainer final : public TrainableModel {
 public:
  SeldTrainer(SeldNet<T>& net, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
              const TrainSchedule& sched, EvalOptions eval = {});

  double train_epoch(double lr, int epoch) override;
  ValidationResult validate() override;
  void save_best() override;
  void restore_best();
  Adam<T>& optimizer() { return adam_; }

 private:
  SeldNet<T>& net_;
  const std::vector<Sample>& train_;
  const std::vector<Sample>& val_;
  TrainSchedule sched_;
  EvalOptions eval_;
  Adam<T> adam_;
  std::vector<AlignedVector<T>> best_;
};

/// Full training run; on return the network holds the parameters of the
/// best validation epoch.
template <typename T>
TrainResult train(SeldNet<T>& net, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainSchedule& sched, const EpochCallback& on_epoch = {});

std::string training_log_header();
std::string training_log_row(const EpochRecord& r);

}  // namespace seld::nn
