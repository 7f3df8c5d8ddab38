#pragma once

#include <functional>
#include <vector>

#include "seld/nn/train.hpp"

namespace testutil {

/// A model whose validation score follows a scripted function of the epoch.
/// Records the learning rate each epoch was trained with.
class ScriptedModel final : public seld::nn::TrainableModel {
 public:
  explicit ScriptedModel(std::function<double(int)> score) : score_(std::move(score)) {}

  double train_epoch(double lr, int epoch) override {
    lrs.push_back(lr);
    epoch_ = epoch;
    return 1.0;
  }
  seld::nn::ValidationResult validate() override {
    seld::nn::ValidationResult v;
    // seld_score averages ER, 1 - F, LE / 180 and 1 - LR; only ER varies here.
    v.metrics.er20 = 4.0 * score_(epoch_);
    v.metrics.f20 = 1.0;
    v.metrics.le_cd = 0.0;
    v.metrics.lr_cd = 1.0;
    return v;
  }
  void save_best() override { saves.push_back(epoch_); }

  std::vector<double> lrs;
  std::vector<int> saves;

 private:
  std::function<double(int)> score_;
  int epoch_ = 0;
};

}  // namespace testutil
