#include <atomic>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "seld/app.hpp"
#include "seld/io.hpp"
#include "seld/nn/checkpoint.hpp"

namespace seld::app {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string stage_name(Stage s) { return s == Stage::Development ? "development" : "evaluation"; }

ordered_json folds_json(const FoldAssignment& f) {
  ordered_json j;
  j["stage"] = stage_name(f.stage);
  j["train"] = f.train_folds;
  j["val"] = f.val_folds;
  j["test"] = f.test_folds;
  return j;
}

ordered_json network_json(const nn::NetworkConfig& c) {
  ordered_json j;
  j["input_channels"] = c.input_channels;
  j["input_bins"] = c.input_bins;
  j["filters"] = c.filters;
  j["ratio"] = c.ratio;
  j["num_classes"] = c.num_classes;
  j["time_pools"] = c.time_pools;
  j["freq_pools"] = c.freq_pools;
  j["rnn_units"] = c.rnn_units;
  j["rnn_layers"] = c.rnn_layers;
  j["fc_units"] = c.fc_units;
  j["merge"] = c.merge == nn::MergeOp::Add ? "add" : "max";
  j["use_scse"] = c.use_scse;
  j["seed"] = c.seed;
  return j;
}

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

std::vector<CorpusEntry> manifest_of(const fs::path& corpus) {
  const fs::path p = corpus / "fold_manifest.csv";
  if (!fs::exists(p)) throw std::runtime_error("no fold manifest at " + p.string());
  return read_manifest(p);
}

}  // namespace

fs::path feature_path(const fs::path& features_dir, const std::string& stem) {
  return features_dir / (stem + kFeatureExt);
}

std::vector<CorpusEntry> select_folds(const std::vector<CorpusEntry>& entries, const std::set<int>& folds) {
  std::vector<CorpusEntry> out;
  for (const CorpusEntry& e : entries)
    if (folds.count(e.fold)) out.push_back(e);
  return out;
}

std::vector<nn::Sample> load_samples(const fs::path& corpus, const fs::path& features,
                                     const std::vector<CorpusEntry>& entries, int num_classes) {
  std::vector<nn::Sample> samples;
  samples.reserve(entries.size());
  for (const CorpusEntry& e : entries) {
    const fs::path fp = feature_path(features, e.stem);
    if (!fs::exists(fp)) throw std::runtime_error("missing feature file " + fp.string());
    const fs::path mp = corpus / "metadata" / (e.stem + ".csv");
    if (!fs::exists(mp)) throw std::runtime_error("missing metadata file " + mp.string());
    nn::Sample s;
    s.name = e.stem;
    s.features = read_feature_file(fp);
    s.reference = read_metadata(mp, num_classes);
    const int label_frames = s.features.frames / kFeatureFramesPerLabel;
    s.targets = encode(s.reference, label_frames, num_classes);
    samples.push_back(std::move(s));
  }
  return samples;
}

int cmd_synth(const SynthOptions& opts, std::ostream& out) {
  const auto entries = make_corpus(opts.corpus, opts.out);
  std::map<int, int> per_fold;
  for (const CorpusEntry& e : entries) ++per_fold[e.fold];
  out << "wrote " << entries.size() << " scenes to " << opts.out.string() << '\n';
  for (const auto& [fold, n] : per_fold) out << "  fold " << fold << ": " << n << " scenes\n";
  return kExitOk;
}

int cmd_extract(const ExtractOptions& opts, std::ostream& out, std::ostream& err) {
  if (opts.jobs < 1) throw UsageError("--jobs must be at least 1");
  const auto entries = manifest_of(opts.corpus);
  fs::create_directories(opts.out);
  const StftConfig stft;
  const MelFilterbank fb = MelFilterbank::make(64, 24000, stft.fft_size);

  auto extract_one = [&](const CorpusEntry& e) {
    auto load = [&](const char* sub, ClipFormat fmt) {
      return read_wav(opts.corpus / sub / (e.stem + ".wav"), fmt);
    };
    FeatureTensor t;
    switch (opts.format) {
      case FeatureSource::Mic: t = extract_features(load("mic", ClipFormat::Mic4), stft, fb); break;
      case FeatureSource::Foa: t = extract_features(load("foa", ClipFormat::Foa), stft, fb); break;
      case FeatureSource::FoaMic:
        t = concat_features(extract_features(load("foa", ClipFormat::Foa), stft, fb),
                            extract_features(load("mic", ClipFormat::Mic4), stft, fb));
        break;
    }
    write_feature_file(feature_path(opts.out, e.stem), t);
    return t.channels;
  };

  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  std::mutex err_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      try {
        extract_one(entries[i]);
      } catch (const std::exception& ex) {
        ++failures;
        std::lock_guard lock(err_mu);
        err << "error: " << entries[i].stem << ": " << ex.what() << '\n';
      }
    }
  };
  const int n_threads = std::min<int>(opts.jobs, static_cast<int>(std::max<std::size_t>(entries.size(), 1)));
  std::vector<std::thread> pool;
  for (int i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  ordered_json j;
  j["format"] = to_string(opts.format);
  j["channels"] = feature_channels_for(opts.format);
  j["sample_rate"] = 24000;
  j["fft_size"] = stft.fft_size;
  j["window"] = stft.window_size;
  j["hop"] = stft.hop_size;
  j["n_mels"] = fb.n_mels;
  j["corpus"] = fs::absolute(opts.corpus).string();
  j["files"] = entries.size() - static_cast<std::size_t>(failures.load());
  write_json(opts.out / "extract_config.json", j);

  out << "extracted " << entries.size() - failures.load() << "/" << entries.size() << " files ("
      << to_string(opts.format) << ", " << feature_channels_for(opts.format) << " channels) to " << opts.out.string()
      << '\n';
  return failures.load() == 0 ? kExitOk : kExitFailure;
}

int cmd_train(const TrainOptions& opts, std::ostream& out) {
  const FoldAssignment folds = make_folds(opts.stage);
  const auto entries = manifest_of(opts.corpus);
  const auto train_entries = select_folds(entries, folds.train_folds);
  const auto val_entries = select_folds(entries, folds.val_folds);
  if (train_entries.empty()) throw std::runtime_error("corpus has no scenes in the training folds");
  if (val_entries.empty()) throw std::runtime_error("corpus has no scenes in the validation folds");

  nn::NetworkConfig net_cfg = opts.network;
  std::vector<nn::Sample> train_set = load_samples(opts.corpus, opts.features, train_entries, net_cfg.num_classes);
  std::vector<nn::Sample> val_set = load_samples(opts.corpus, opts.features, val_entries, net_cfg.num_classes);

  std::vector<const FeatureTensor*> refs;
  for (const nn::Sample& s : train_set) refs.push_back(&s.features);
  const FeatureStats norm = FeatureStats::compute(refs);
  for (nn::Sample& s : train_set) norm.apply(s.features);
  for (nn::Sample& s : val_set) norm.apply(s.features);

  net_cfg.input_channels = train_set.front().features.channels;
  net_cfg.input_bins = train_set.front().features.bins;
  net_cfg.validate();

  fs::create_directories(opts.out);
  ordered_json rc;
  rc["command"] = "train";
  rc["corpus"] = fs::absolute(opts.corpus).string();
  rc["features"] = fs::absolute(opts.features).string();
  rc["folds"] = folds_json(folds);
  rc["train_scenes"] = train_set.size();
  rc["val_scenes"] = val_set.size();
  rc["network"] = network_json(net_cfg);
  rc["schedule"] = {{"initial_lr", opts.schedule.initial_lr},   {"decay_factor", opts.schedule.decay_factor},
                    {"patience_decay", opts.schedule.patience_decay}, {"patience_stop", opts.schedule.patience_stop},
                    {"batch_size", opts.schedule.batch_size},   {"max_epochs", opts.schedule.max_epochs},
                    {"max_seconds", opts.schedule.max_seconds}, {"seed", opts.schedule.seed}};
  rc["decode_threshold"] = opts.threshold;
  rc["spatial_threshold_deg"] = opts.spatial_threshold_deg;
  rc["precision"] = "float32";
  write_json(opts.out / kRunConfigName, rc);

  nn::SeldNet<float> net(net_cfg);
  nn::EvalOptions eval;
  eval.decode.activity_threshold = opts.threshold;
  eval.threshold.spatial_threshold_deg = opts.spatial_threshold_deg;
  eval.batch_size = opts.schedule.batch_size;
  nn::SeldTrainer<float> trainer(net, train_set, val_set, opts.schedule, eval);

  std::ofstream log(opts.out / kTrainLogName);
  if (!log) throw std::runtime_error("cannot write training log in " + opts.out.string());
  log << nn::training_log_header() << '\n';
  const auto t0 = std::chrono::steady_clock::now();
  const nn::TrainResult result = nn::run_schedule(trainer, opts.schedule, [&](const nn::EpochRecord& r) {
    log << nn::training_log_row(r) << std::endl;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out << "epoch " << r.epoch << "  lr " << r.lr << "  train " << std::fixed << std::setprecision(5) << r.train_loss
        << "  val " << r.val_loss << "  ER " << std::setprecision(3) << r.val.er20 << "  F " << r.val.f20 << "  LE "
        << std::setprecision(1) << r.val.le_cd << "  LR " << std::setprecision(3) << r.val.lr_cd << "  ("
        << std::setprecision(0) << secs << " s)" << std::defaultfloat << std::setprecision(6) << std::endl;
  });
  trainer.restore_best();
  const nn::Checkpoint ckpt = nn::make_checkpoint(net, &trainer.optimizer(), &norm);
  nn::save_checkpoint(opts.out / kCheckpointName, ckpt);

  out << "stopped: " << result.stop_reason << "; best epoch " << result.best_epoch << " (score " << result.best_score
      << ")\ncheckpoint: " << (opts.out / kCheckpointName).string() << '\n';
  return kExitOk;
}

int cmd_eval(const EvalOptions& opts, std::ostream& out, MetricsReport* report_out) {
  const FoldAssignment folds = make_folds(opts.stage);
  const auto test_entries = select_folds(manifest_of(opts.corpus), folds.test_folds);
  if (test_entries.empty()) throw std::runtime_error("corpus has no scenes in the test folds");

  ThresholdConfig thr;
  thr.spatial_threshold_deg = opts.spatial_threshold_deg;
  MetricsReport report;
  if (opts.oracle) {
    MetricCounts counts;
    for (const CorpusEntry& e : test_entries) {
      const EventList ref = read_metadata(opts.corpus / "metadata" / (e.stem + ".csv"));
      counts += score_segments(ref, ref, thr).counts;
    }
    report = finalize_report(counts);
  } else {
    if (opts.checkpoint.empty()) throw UsageError("eval needs --checkpoint unless --oracle is given");
    const nn::Checkpoint ckpt = nn::load_checkpoint(opts.checkpoint);
    nn::SeldNet<float> net(ckpt.config);
    nn::restore_network(ckpt, net);
    std::vector<nn::Sample> test_set =
        load_samples(opts.corpus, opts.features, test_entries, ckpt.config.num_classes);
    const FeatureTensor& ft = test_set.front().features;
    if (ft.channels != ckpt.config.input_channels || ft.bins != ckpt.config.input_bins)
      throw std::runtime_error("checkpoint/config mismatch: network expects " +
                               std::to_string(ckpt.config.input_channels) + " channels x " +
                               std::to_string(ckpt.config.input_bins) + " bins, features have " +
                               std::to_string(ft.channels) + " x " + std::to_string(ft.bins));
    if (const auto norm = nn::checkpoint_feature_stats(ckpt))
      for (nn::Sample& s : test_set) norm->apply(s.features);
    nn::EvalOptions eo;
    eo.decode.activity_threshold = opts.threshold;
    eo.threshold = thr;
    const nn::Evaluation<float> ev = nn::evaluate(net, test_set, eo);
    report = ev.metrics;
    if (opts.predictions_dir) {
      fs::create_directories(*opts.predictions_dir);
      for (std::size_t i = 0; i < test_set.size(); ++i)
        write_metadata(ev.predictions[i], *opts.predictions_dir / (test_set[i].name + ".csv"));
    }
  }

  print_report_table(out, report, opts.oracle ? "oracle" : "test");
  out << "scenes: " << test_entries.size() << " (folds";
  for (int f : folds.test_folds) out << ' ' << f;
  out << ")\n";
  if (opts.report_csv) {
    std::ofstream os(*opts.report_csv);
    if (!os) throw std::runtime_error("cannot write " + opts.report_csv->string());
    os << report_csv_header() << '\n' << report_csv_row(report) << '\n';
  }
  if (report_out) *report_out = report;
  return kExitOk;
}

}  // namespace seld::app
