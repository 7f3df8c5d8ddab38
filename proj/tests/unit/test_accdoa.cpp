#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "seld/accdoa.hpp"
#include "support/oracles.hpp"

using namespace seld;

namespace {

bool near(const Vec3& a, const Vec3& b, double tol) {
  return std::abs(a[0] - b[0]) < tol && std::abs(a[1] - b[1]) < tol && std::abs(a[2] - b[2]) < tol;
}

}  // namespace

TEST_CASE("sph_to_cart axes") {
  CHECK(near(sph_to_cart(0, 0), {1, 0, 0}, 1e-12));
  CHECK(near(sph_to_cart(90, 0), {0, 1, 0}, 1e-12));
  CHECK(near(sph_to_cart(0, 90), {0, 0, 1}, 1e-12));
  CHECK(std::abs(norm(sph_to_cart(-123.4, 37.5)) - 1.0) < 1e-12);
}

TEST_CASE("cart_to_sph conventions") {
  const Direction d = cart_to_sph({0, -1, 0});
  CHECK(d.azimuth_deg == doctest::Approx(-90.0));
  CHECK(d.elevation_deg == doctest::Approx(0.0));

  const Direction pole = cart_to_sph({0, 0, 1});
  CHECK(pole.azimuth_deg == 0.0);
  CHECK(pole.elevation_deg == doctest::Approx(90.0));

  const Direction back = cart_to_sph({-1, 0, 0});
  CHECK(back.azimuth_deg == doctest::Approx(-180.0));

  CHECK_THROWS_AS(cart_to_sph({0, 0, 0}), std::invalid_argument);
}

TEST_CASE("cart_to_sph inverts sph_to_cart on random unit vectors") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Vec3 v{g(rng), g(rng), g(rng)};
    const double n = norm(v);
    for (double& c : v) c /= n;
    const Direction d = cart_to_sph(v);
    CHECK(d.azimuth_deg >= -180.0);
    CHECK(d.azimuth_deg < 180.0);
    worst = std::max(worst, oracle::precise_angle_deg(v, sph_to_cart(d.azimuth_deg, d.elevation_deg)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("encode examples") {
  SUBCASE("empty list gives zero frames") {
    const auto frames = encode({}, 5, 12);
    REQUIRE(frames.size() == 5);
    for (const auto& f : frames)
      for (const auto& v : f.vectors) CHECK(v == Vec3{0, 0, 0});
  }
  SUBCASE("single event on frames 2-4") {
    EventList ev;
    for (int f = 2; f <= 4; ++f) ev.push_back({f, 3, 0, 0.0, 0.0});
    const auto frames = encode(ev, 8, 12);
    for (int f = 0; f < 8; ++f)
      for (int k = 0; k < 12; ++k) {
        const Vec3 expect = (k == 3 && f >= 2 && f <= 4) ? Vec3{1, 0, 0} : Vec3{0, 0, 0};
        CHECK(near(frames[f].vectors[k], expect, 1e-12));
      }
  }
  SUBCASE("lowest track wins") {
    EventList ev{{0, 1, 1, 90.0, 0.0}, {0, 1, 0, 0.0, 0.0}};
    const auto frames = encode(ev, 1, 12);
    CHECK(near(frames[0].vectors[1], {1, 0, 0}, 1e-12));
  }
  SUBCASE("out of range frame") {
    CHECK_THROWS_AS(encode({{5, 0, 0, 0, 0}}, 5, 12), std::out_of_range);
  }
}

TEST_CASE("decode examples") {
  std::vector<AccdoaFrame> frames(1, AccdoaFrame(12));
  CHECK(decode(frames).empty());

  frames[0].vectors[4] = {0, 1, 0};
  auto ev = decode(frames);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].class_index == 4);
  CHECK(ev[0].track == 0);
  CHECK(ev[0].azimuth_deg == doctest::Approx(90.0));
  CHECK(ev[0].elevation_deg == doctest::Approx(0.0));

  frames[0].vectors[4] = {0, 0.4, 0};
  CHECK(decode(frames, {0.5}).empty());
  frames[0].vectors[4] = {0, 0.6, 0};
  CHECK(decode(frames, {0.5}).size() == 1);

  CHECK_THROWS(decode(frames, {0.0}));
  CHECK_THROWS(decode(frames, {1.0}));
}

TEST_CASE("encode rows are zero or unit") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> az(-180, 180), el(-90, 90);
  EventList ev;
  for (int f = 0; f < 50; ++f)
    for (int k = 0; k < 12; ++k)
      if (rng() % 3 == 0) ev.push_back({f, k, static_cast<int>(rng() % 2), az(rng), el(rng)});
  for (const auto& frame : encode(ev, 50, 12))
    for (const auto& v : frame.vectors) {
      const double n = norm(v);
      CHECK((n == 0.0 || std::abs(n - 1.0) < 1e-9));
    }
}

TEST_CASE("decode threshold is monotone") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<AccdoaFrame> frames(30, AccdoaFrame(12));
  for (auto& f : frames)
    for (auto& v : f.vectors) v = {u(rng), u(rng), u(rng)};
  std::size_t prev = decode(frames, {0.05}).size();
  for (double thr = 0.1; thr < 1.0; thr += 0.05) {
    const std::size_t n = decode(frames, {thr}).size();
    CHECK(n <= prev);
    prev = n;
  }
}

TEST_CASE("validate_events rejects duplicates and out-of-range values") {
  CHECK_NOTHROW(validate_events({{0, 0, 0, -180.0, 0.0}}, 12));
  CHECK_THROWS(validate_events({{0, 0, 0, 180.0, 0.0}}, 12));
  CHECK_THROWS(validate_events({{0, 12, 0, 0.0, 0.0}}, 12));
  CHECK_THROWS(validate_events({{0, 0, 0, 0.0, 91.0}}, 12));
  CHECK_THROWS(validate_events({{-1, 0, 0, 0.0, 0.0}}, 12));
  CHECK_THROWS(validate_events({{0, 1, 0, 0.0, 0.0}, {0, 1, 0, 5.0, 0.0}}, 12));
}
