#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "seld/metrics.hpp"
#include "support/oracles.hpp"
#include "support/random_events.hpp"

using namespace seld;

TEST_CASE("hungarian small cases") {
  const auto a = hungarian({{1, 2}, {2, 1}});
  CHECK(a == std::vector<int>{0, 1});

  const auto row = hungarian({{5, 3, 9, 1, 4}});
  CHECK(row == std::vector<int>{3});

  const auto tall = hungarian({{4}, {1}, {3}});
  CHECK(tall == std::vector<int>{-1, 0, -1});

  CHECK(hungarian({}).empty());
  CHECK(hungarian({{}, {}}) == std::vector<int>{-1, -1});
  CHECK_THROWS(hungarian({{1, 2}, {3}}));
}

TEST_CASE("hungarian matches brute force on random rectangular matrices") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 100);
  for (int trial = 0; trial < 300; ++trial) {
    const int rows = 1 + static_cast<int>(rng() % 6), cols = 1 + static_cast<int>(rng() % 6);
    std::vector<std::vector<double>> cost(rows, std::vector<double>(cols));
    for (auto& r : cost)
      for (double& c : r) c = (trial % 3 == 0) ? std::floor(u(rng) / 20) : u(rng);  // some ties
    const auto assign = hungarian(cost);
    double total = 0.0;
    int used = 0;
    std::vector<int> seen(cols, 0);
    for (int r = 0; r < rows; ++r) {
      if (assign[r] < 0) continue;
      CHECK(seen[assign[r]]++ == 0);
      total += cost[r][assign[r]];
      ++used;
    }
    CHECK(used == std::min(rows, cols));
    CHECK(total == doctest::Approx(oracle::brute_force_min_cost(cost)).epsilon(1e-12));
  }
}

TEST_CASE("angular_distance examples") {
  CHECK(angular_distance({1, 0, 0}, {1, 0, 0}) == 0.0);
  CHECK(angular_distance({1, 0, 0}, {0, 1, 0}) == doctest::Approx(90.0));
  CHECK(angular_distance({1, 0, 0}, {-1, 0, 0}) == doctest::Approx(180.0));
  CHECK_THROWS(angular_distance({2, 0, 0}, {1, 0, 0}));
}

TEST_CASE("match_class_instances examples") {
  const auto one = match_class_instances({{1, 0, 0}}, {{0, 1, 0}});
  REQUIRE(one.pairs.size() == 1);
  CHECK(one.pairs[0].error_deg == doctest::Approx(90.0));

  const auto crossed = match_class_instances({{1, 0, 0}, {0, 1, 0}}, {{0, 1, 0}, {1, 0, 0}});
  REQUIRE(crossed.pairs.size() == 2);
  CHECK(crossed.pairs[0].pred == 1);
  CHECK(crossed.pairs[1].pred == 0);
  CHECK(crossed.pairs[0].error_deg + crossed.pairs[1].error_deg == doctest::Approx(0.0));

  const auto none = match_class_instances({{1, 0, 0}, {0, 1, 0}}, {});
  CHECK(none.pairs.empty());
  CHECK(none.unmatched_refs.size() == 2);
}

TEST_CASE("score_segments hand cases") {
  const EventList ref{{0, 2, 0, 0.0, 0.0}};
  SUBCASE("exact match") {
    const auto r = score_segments(ref, ref);
    CHECK(r.er20 == 0.0);
    CHECK(r.f20 == 1.0);
    CHECK(r.le_cd == 0.0);
    CHECK(r.lr_cd == 1.0);
  }
  SUBCASE("25 degrees off is a substitution") {
    const auto r = score_segments(ref, {{0, 2, 0, 25.0, 0.0}});
    CHECK(r.counts.tp == 0);
    CHECK(r.counts.fp == 1);
    CHECK(r.counts.fn == 1);
    CHECK(r.counts.substitutions == 1);
    CHECK(r.er20 == 1.0);
    CHECK(r.f20 == 0.0);
    CHECK(r.le_cd == doctest::Approx(25.0));
    CHECK(r.lr_cd == 1.0);
  }
  SUBCASE("15 degrees off is a hit") {
    const auto r = score_segments(ref, {{0, 2, 0, 15.0, 0.0}});
    CHECK(r.counts.tp == 1);
    CHECK(r.er20 == 0.0);
    CHECK(r.f20 == 1.0);
    CHECK(r.le_cd == doctest::Approx(15.0));
    CHECK(r.lr_cd == 1.0);
  }
  SUBCASE("wrong class is a deletion plus an insertion within one segment") {
    const auto r = score_segments(ref, {{0, 3, 0, 0.0, 0.0}});
    CHECK(r.counts.substitutions == 1);
    CHECK(r.counts.deletions == 0);
    CHECK(r.counts.insertions == 0);
    CHECK(r.lr_cd == 0.0);
  }
  SUBCASE("silence on both sides") {
    const auto r = score_segments({}, {});
    CHECK(r.er20 == 0.0);
    CHECK(r.f20 == 0.0);
    CHECK(r.f_undefined);
    CHECK(r.lr_cd == 1.0);
  }
  SUBCASE("insertions only") {
    const auto r = score_segments({}, {{0, 0, 0, 0.0, 0.0}, {12, 0, 0, 0.0, 0.0}});
    CHECK(r.counts.insertions == 2);
    CHECK(r.er20 == 2.0);
  }
  SUBCASE("rate mismatch") {
    CHECK_THROWS(score_segments(ref, ref, {}, 10.0, 20.0));
  }
}

TEST_CASE("segment pooling averages each track") {
  // Two frames of one track at az 10 and 30 pool to az 20.
  const EventList pred{{0, 1, 0, 10.0, 0.0}, {1, 1, 0, 30.0, 0.0}};
  const auto r = score_segments({{0, 1, 0, 20.0, 0.0}}, pred);
  CHECK(r.le_cd == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(r.counts.tp == 1);
}

TEST_CASE("score_segments equals the brute-force scorer") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 400; ++trial) {
    const auto [ref, pred] = testgen::random_pair(rng, 3, 4, 6);
    const double thr = 20.0;
    const auto r = score_segments(ref, pred, {thr});
    const auto o = oracle::brute_force_score(ref, pred, thr);
    REQUIRE(r.counts.tp == o.tp);
    REQUIRE(r.counts.fp == o.fp);
    REQUIRE(r.counts.fn == o.fn);
    REQUIRE(r.counts.substitutions == o.s);
    REQUIRE(r.counts.deletions == o.d);
    REQUIRE(r.counts.insertions == o.i);
    REQUIRE(r.counts.n_ref == o.n_ref);
    CHECK(r.le_cd == o.le());
    CHECK(r.er20 == o.er());
    CHECK(r.f20 == o.f());
    CHECK(r.lr_cd == o.lr());
  }
}

TEST_CASE("metric properties") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    auto [ref, pred] = testgen::random_pair(rng, 3, 4, 4);

    // Threshold monotonicity and LE/LR independence.
    double prev_f = -1.0, prev_er = 1e9;
    const auto base = score_segments(ref, pred, {20.0});
    for (double thr : {1.0, 10.0, 20.0, 45.0, 90.0, 180.0}) {
      const auto r = score_segments(ref, pred, {thr});
      CHECK(r.f20 >= prev_f);
      CHECK(r.er20 <= prev_er);
      CHECK(r.le_cd == base.le_cd);
      CHECK(r.lr_cd == base.lr_cd);
      prev_f = r.f20;
      prev_er = r.er20;
    }

    // Record order does not matter.
    std::shuffle(ref.begin(), ref.end(), rng);
    std::shuffle(pred.begin(), pred.end(), rng);
    const auto shuffled = score_segments(ref, pred, {20.0});
    CHECK(shuffled.counts.tp == base.counts.tp);
    CHECK(shuffled.er20 == base.er20);
    CHECK(shuffled.f20 == base.f20);
    CHECK(shuffled.le_cd == doctest::Approx(base.le_cd).epsilon(1e-12));
    CHECK(shuffled.lr_cd == base.lr_cd);

    // Perfect case.
    if (!ref.empty()) {
      const auto self = score_segments(ref, ref);
      CHECK(self.er20 == 0.0);
      CHECK(self.f20 == 1.0);
      CHECK(self.le_cd == doctest::Approx(0.0).epsilon(1e-6));
      CHECK(self.lr_cd == 1.0);
    }
  }
}

TEST_CASE("micro-averaging sums counts before dividing") {
  const EventList a{{0, 0, 0, 0.0, 0.0}};
  const EventList b{{0, 0, 0, 0.0, 0.0}, {0, 1, 0, 0.0, 0.0}, {0, 2, 0, 0.0, 0.0}};
  MetricCounts c = score_segments(a, a).counts;
  c += score_segments(b, {}).counts;
  const auto r = finalize_report(c);
  CHECK(r.counts.n_ref == 4);
  CHECK(r.er20 == doctest::Approx(3.0 / 4.0));
  CHECK(r.f20 == doctest::Approx(2.0 / 5.0));
  CHECK(r.lr_cd == doctest::Approx(1.0 / 4.0));
}

TEST_CASE("report output keeps the ER, F, LE, LR column order") {
  MetricsReport r;
  r.er20 = 0.72;
  r.f20 = 0.302;
  r.le_cd = 29.4;
  r.lr_cd = 0.425;
  CHECK(report_csv_header() == "ER20,F20,LE,LR");
  CHECK(report_csv_row(r) == "0.7200,30.20,29.40,42.50");
  std::ostringstream os;
  print_report_table(os, r, "run");
  const std::string s = os.str();
  CHECK(s.find("ER20") < s.find("F20"));
  CHECK(s.find("F20") < s.find("LE_CD"));
  CHECK(s.find("LE_CD") < s.find("LR_CD"));
  CHECK(s.find("30.2%") != std::string::npos);
  CHECK(r.seld_score() == doctest::Approx((0.72 + 0.698 + 29.4 / 180 + 0.575) / 4));
}
