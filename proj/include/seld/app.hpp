#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "seld/data.hpp"
#include "seld/features.hpp"
#include "seld/metrics.hpp"
#include "seld/nn/train.hpp"

namespace seld::app {

/// Raised for invalid flag combinations detected after parsing; maps to
/// exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable naming the default corpus root.
inline constexpr const char* kCorpusRootEnv = "SELD_CORPUS_ROOT";
inline constexpr const char* kFeatureExt = ".feat";
inline constexpr const char* kCheckpointName = "checkpoint.seldcp";
inline constexpr const char* kTrainLogName = "train_log.csv";
inline constexpr const char* kRunConfigName = "run_config.json";

struct SynthOptions {
  CorpusConfig corpus;
  std::filesystem::path out;
};

struct ExtractOptions {
  FeatureSource format = FeatureSource::Mic;
  std::filesystem::path corpus;
  std::filesystem::path out;
  int jobs = 1;
};

struct TrainOptions {
  std::filesystem::path corpus;
  std::filesystem::path features;
  std::filesystem::path out;
  Stage stage = Stage::Development;
  nn::NetworkConfig network;
  nn::TrainSchedule schedule;
  double threshold = 0.5;
  double spatial_threshold_deg = 20.0;
};

struct EvalOptions {
  std::filesystem::path corpus;
  std::filesystem::path features;
  std::filesystem::path checkpoint;
  Stage stage = Stage::Development;
  bool oracle = false;
  double threshold = 0.5;
  double spatial_threshold_deg = 20.0;
  std::optional<std::filesystem::path> report_csv;
  std::optional<std::filesystem::path> predictions_dir;
};

int cmd_synth(const SynthOptions& opts, std::ostream& out);
int cmd_extract(const ExtractOptions& opts, std::ostream& out, std::ostream& err);
int cmd_train(const TrainOptions& opts, std::ostream& out);
/// Writes the report into `report` when given.
int cmd_eval(const EvalOptions& opts, std::ostream& out, MetricsReport* report = nullptr);

/// Feature file of one corpus entry.
std::filesystem::path feature_path(const std::filesystem::path& features_dir, const std::string& stem);

/// Manifest entries whose fold is in `folds`, in manifest order.
std::vector<CorpusEntry> select_folds(const std::vector<CorpusEntry>& entries, const std::set<int>& folds);

/// Features, ACCDOA targets and reference events of the given entries.
/// Throws when a feature or metadata file is missing.
std::vector<nn::Sample> load_samples(const std::filesystem::path& corpus, const std::filesystem::path& features,
                                     const std::vector<CorpusEntry>& entries, int num_classes);

/// Parses argv-style arguments (without the program name) and dispatches.
/// Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seld::app
