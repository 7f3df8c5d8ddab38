#include <doctest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include "seld/app.hpp"
#include "seld/io.hpp"
#include "support/tempdir.hpp"

using seld::app::run_cli;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> v;
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) v.push_back(l);
  return v;
}

// 16 two-second scenes, two per fold.
void make_corpus(const std::filesystem::path& dir, std::uint64_t seed = 4, int folds = 8) {
  const auto r = cli({"synth", "--scenes", "16", "--folds", std::to_string(folds), "--duration", "2", "--seed",
                      std::to_string(seed), "--out", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(cli({"synth", "--scenes", "0", "--out", "x"}).code == 2);
  CHECK(cli({}).code == 2);
  CHECK(cli({"bogus"}).code == 2);
  CHECK(cli({"extract", "--format", "stereo", "a", "b"}).code == 2);
  CHECK(cli({"train", "--features", "f"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("synth is deterministic") {
  testutil::TempDir a, b;
  make_corpus(a.path(), 21);
  make_corpus(b.path(), 21);
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path());
    CAPTURE(rel.string());
    CHECK(slurp(e.path()) == slurp(b.path() / rel));
  }
  const auto manifest = lines(a / "fold_manifest.csv");
  CHECK(manifest.size() >= 16);
}

TEST_CASE("extract writes the channel count of each format") {
  testutil::TempDir dir;
  make_corpus(dir.path());
  for (auto [fmt, ch] : {std::pair{"mic", 10}, {"foa", 7}, {"foa-mic", 17}}) {
    const auto out = dir / (std::string("feat_") + fmt);
    const auto r = cli({"extract", "--format", fmt, "-j", "2", dir.path().string(), out.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto t = seld::read_feature_file(out / "fold1_scene0000.feat");
    CHECK(t.channels == ch);
    CHECK(t.frames == 100);
    CHECK(t.bins == 64);
  }
}

TEST_CASE("extract reports missing inputs") {
  testutil::TempDir dir;
  const auto r = cli({"extract", "--format", "foa", (dir / "nothing").string(), (dir / "out").string()});
  CHECK(r.code == 1);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("train then eval pipeline") {
  testutil::TempDir dir;
  const auto corpus = dir / "corpus", feats = dir / "feat", run = dir / "run";
  make_corpus(corpus);
  REQUIRE(cli({"extract", "--format", "foa", corpus.string(), feats.string()}).code == 0);

  const auto t = cli({"train", "--corpus", corpus.string(), "--features", feats.string(), "--out", run.string(),
                      "--max-epochs", "1", "--filters", "4", "--rnn-units", "8", "--fc-units", "8", "--batch", "4"});
  REQUIRE_MESSAGE(t.code == 0, t.err);
  const auto log = lines(run / "train_log.csv");
  REQUIRE(log.size() == 2);
  CHECK(log[0] == "epoch,lr,train_loss,val_loss,val_ER,val_F,val_LE,val_LR,seld_score");
  CHECK(std::filesystem::exists(run / "checkpoint.seldcp"));
  CHECK(std::filesystem::exists(run / "run_config.json"));

  const auto report = dir / "report.csv";
  const auto e = cli({"eval", "--corpus", corpus.string(), "--features", feats.string(), "--checkpoint",
                      (run / "checkpoint.seldcp").string(), "--report", report.string(), "--predictions",
                      (dir / "pred").string()});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  CHECK(e.out.find("ER20") != std::string::npos);
  const auto rows = lines(report);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "ER20,F20,LE,LR");
  CHECK(std::filesystem::exists(dir / "pred" / "fold1_scene0000.csv"));

  SUBCASE("missing features fail with code 1") {
    const auto m = cli({"eval", "--corpus", corpus.string(), "--features", (dir / "none").string(), "--checkpoint",
                        (run / "checkpoint.seldcp").string()});
    CHECK(m.code == 1);
  }
  SUBCASE("a checkpoint does not load onto other features") {
    const auto mic = dir / "mic";
    REQUIRE(cli({"extract", "--format", "mic", corpus.string(), mic.string()}).code == 0);
    const auto m = cli({"eval", "--corpus", corpus.string(), "--features", mic.string(), "--checkpoint",
                        (run / "checkpoint.seldcp").string()});
    CHECK(m.code == 1);
  }
}

TEST_CASE("oracle evaluation is perfect") {
  testutil::TempDir dir;
  make_corpus(dir.path());
  std::ostringstream out;
  seld::app::EvalOptions opts;
  opts.corpus = dir.path();
  opts.oracle = true;
  seld::MetricsReport rep;
  REQUIRE(seld::app::cmd_eval(opts, out, &rep) == 0);
  CHECK(rep.er20 == 0.0);
  CHECK(rep.f20 == 1.0);
  CHECK(rep.le_cd == 0.0);
  CHECK(rep.lr_cd == 1.0);

  const auto r = cli({"eval", "--oracle", "--corpus", dir.path().string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("100.0%") != std::string::npos);
}

TEST_CASE("evaluation stage without its test folds fails") {
  testutil::TempDir dir;
  make_corpus(dir.path(), 4, 6);
  const auto r = cli({"eval", "--oracle", "--stage", "evaluation", "--corpus", dir.path().string()});
  CHECK(r.code != 0);
  CHECK_FALSE(r.err.empty());
}
