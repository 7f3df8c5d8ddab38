#include <algorithm>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "seld/app.hpp"

namespace seld::app {

namespace fs = std::filesystem;

namespace {

fs::path corpus_or_env(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv(kCorpusRootEnv); env && *env) return env;
  throw UsageError(std::string("no corpus given; pass --corpus or set ") + kCorpusRootEnv);
}

FeatureSource parse_format(const std::string& s) {
  if (s == "mic") return FeatureSource::Mic;
  if (s == "foa") return FeatureSource::Foa;
  if (s == "foa-mic") return FeatureSource::FoaMic;
  throw UsageError("unknown format '" + s + "'");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sound event localization and detection toolkit"};
  app.require_subcommand(1);

  // synth
  SynthOptions synth;
  std::string synth_out;
  bool pcm16 = false, no_mic = false, no_foa = false;
  auto* s = app.add_subcommand("synth", "Generate a synthetic spatial corpus");
  s->add_option("--scenes", synth.corpus.n_scenes, "Number of scenes")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--folds", synth.corpus.fold_count, "Number of folds")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--seed", synth.corpus.seed, "Random seed")->capture_default_str();
  s->add_option("--duration", synth.corpus.duration_s, "Scene length in seconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s->add_option("--max-events", synth.corpus.max_events, "Events per scene, upper bound")->capture_default_str();
  s->add_option("--max-polyphony", synth.corpus.max_polyphony, "Simultaneous events, upper bound")->capture_default_str();
  s->add_option("--tone-probability", synth.corpus.tone_probability, "Share of tonal sources")
      ->check(CLI::Range(0.0, 1.0));
  s->add_flag("--pcm16", pcm16, "Write 16-bit PCM instead of 32-bit float");
  s->add_flag("--no-mic", no_mic, "Skip the microphone-array rendering");
  s->add_flag("--no-foa", no_foa, "Skip the ambisonic rendering");
  s->add_option("--out", synth_out, "Output directory (default $" + std::string(kCorpusRootEnv) + ")");

  // extract
  std::string format = "mic";
  std::vector<std::string> extract_paths;
  ExtractOptions extract;
  auto* e = app.add_subcommand("extract", "Compute feature files for every scene of a corpus");
  e->add_option("--format", format, "mic | foa | foa-mic")
      ->check(CLI::IsMember({"mic", "foa", "foa-mic"}))
      ->capture_default_str();
  e->add_option("--jobs,-j", extract.jobs, "Parallel workers")->check(CLI::PositiveNumber)->capture_default_str();
  e->add_option("paths", extract_paths, "[CORPUS] OUT")->required()->expected(1, 2);

  // train
  TrainOptions train;
  train.network.filters = 16;
  train.schedule.max_seconds = 5 * 60.0;
  std::string train_corpus, train_stage = "development";
  double budget_minutes = 5.0;
  auto* t = app.add_subcommand("train", "Train a model on the training folds");
  t->add_option("--corpus", train_corpus, "Corpus root (default $" + std::string(kCorpusRootEnv) + ")");
  t->add_option("--features", train.features, "Feature directory")->required();
  t->add_option("--out", train.out, "Run directory for checkpoint and logs")->required();
  t->add_option("--stage", train_stage, "development | evaluation")->capture_default_str();
  t->add_option("--filters", train.network.filters, "Convolution filters")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--ratio", train.network.ratio, "Channel squeeze ratio")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--rnn-units", train.network.rnn_units, "GRU units per direction")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  t->add_option("--rnn-layers", train.network.rnn_layers, "Bidirectional GRU layers")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  t->add_option("--fc-units", train.network.fc_units, "Dense units")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--max-epochs", train.schedule.max_epochs, "Epoch limit")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--budget-minutes", budget_minutes, "Wall-clock budget, 0 for none")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  t->add_option("--lr", train.schedule.initial_lr, "Initial learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--batch", train.schedule.batch_size, "Batch size")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--patience-decay", train.schedule.patience_decay, "Stale epochs per decay")->capture_default_str();
  t->add_option("--patience-stop", train.schedule.patience_stop, "Stale epochs before stopping")->capture_default_str();
  t->add_option("--seed", train.network.seed, "Seed for initialisation and shuffling")->capture_default_str();
  t->add_option("--threshold", train.threshold, "Activity threshold when decoding")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  // eval
  EvalOptions eval;
  std::string eval_corpus, eval_stage = "development", report_csv, predictions;
  auto* v = app.add_subcommand("eval", "Score a checkpoint on the test folds");
  v->add_option("--corpus", eval_corpus, "Corpus root (default $" + std::string(kCorpusRootEnv) + ")");
  v->add_option("--features", eval.features, "Feature directory");
  v->add_option("--checkpoint", eval.checkpoint, "Checkpoint file");
  v->add_option("--stage", eval_stage, "development | evaluation")->capture_default_str();
  v->add_flag("--oracle", eval.oracle, "Score the reference labels against themselves");
  v->add_option("--threshold", eval.threshold, "Activity threshold when decoding")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  v->add_option("--report", report_csv, "Also write the metrics as CSV");
  v->add_option("--predictions", predictions, "Directory for decoded per-scene metadata");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return kExitUsage;
  }

  try {
    if (s->parsed()) {
      synth.out = corpus_or_env(synth_out);
      synth.corpus.write_mic = !no_mic;
      synth.corpus.write_foa = !no_foa;
      if (no_mic && no_foa) throw UsageError("--no-mic and --no-foa together leave nothing to write");
      synth.corpus.sample_format = pcm16 ? WavSampleFormat::Pcm16 : WavSampleFormat::Float32;
      try {
        synth.corpus.validate();
      } catch (const std::invalid_argument& ex) {
        throw UsageError(ex.what());
      }
      return cmd_synth(synth, out);
    }
    if (e->parsed()) {
      extract.format = parse_format(format);
      if (extract_paths.size() == 2) {
        extract.corpus = extract_paths[0];
        extract.out = extract_paths[1];
      } else {
        extract.corpus = corpus_or_env("");
        extract.out = extract_paths[0];
      }
      return cmd_extract(extract, out, err);
    }
    if (t->parsed()) {
      train.corpus = corpus_or_env(train_corpus);
      try {
        train.stage = parse_stage(train_stage);
        train.schedule.max_seconds = budget_minutes * 60.0;
        train.schedule.seed = train.network.seed;
        train.schedule.validate();
      } catch (const std::invalid_argument& ex) {
        throw UsageError(ex.what());
      }
      return cmd_train(train, out);
    }
    if (v->parsed()) {
      eval.corpus = corpus_or_env(eval_corpus);
      try {
        eval.stage = parse_stage(eval_stage);
      } catch (const std::invalid_argument& ex) {
        throw UsageError(ex.what());
      }
      if (!eval.oracle && (eval.checkpoint.empty() || eval.features.empty()))
        throw UsageError("eval needs --checkpoint and --features unless --oracle is given");
      if (!report_csv.empty()) eval.report_csv = report_csv;
      if (!predictions.empty()) eval.predictions_dir = predictions;
      return cmd_eval(eval, out);
    }
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace seld::app
