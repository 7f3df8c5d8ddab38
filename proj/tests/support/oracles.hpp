#pragma once

// Slow, obviously-correct reference implementations used to cross-check the
// library. Nothing here calls into the code under test except for the basic
// data types and sph_to_cart.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <tuple>
#include <vector>

#include "seld/accdoa.hpp"
#include "seld/metrics.hpp"

namespace oracle {

using seld::EventList;
using seld::Vec3;

/// atan2 form; keeps full precision for nearly parallel vectors where acos
/// cannot resolve angles below ~1e-6 degrees.
inline double precise_angle_deg(const Vec3& a, const Vec3& b) {
  const Vec3 c{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
  const double cross = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
  return std::atan2(cross, a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) * 180.0 / std::numbers::pi;
}

inline double angle_deg(const Vec3& a, const Vec3& b) { return precise_angle_deg(a, b); }

/// Mean unit direction per (segment, class, track).
inline std::map<std::tuple<int, int, int>, Vec3> pooled_tracks(const EventList& events, int frames_per_segment) {
  std::map<std::tuple<int, int, int>, std::pair<Vec3, Vec3>> acc;  // (sum, first)
  std::map<std::tuple<int, int, int>, int> count;
  for (const auto& e : events) {
    const auto key = std::make_tuple(e.frame / frames_per_segment, e.class_index, e.track);
    const Vec3 u = seld::sph_to_cart(e.azimuth_deg, e.elevation_deg);
    auto& [sum, first] = acc[key];
    if (count[key]++ == 0) first = u;
    for (int i = 0; i < 3; ++i) sum[i] += u[i];
  }
  std::map<std::tuple<int, int, int>, Vec3> out;
  for (const auto& [key, sf] : acc) {
    const auto& [sum, first] = sf;
    const double n = std::sqrt(sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]);
    out[key] = n < 1e-9 ? first : Vec3{sum[0] / n, sum[1] / n, sum[2] / n};
  }
  return out;
}

/// Exhaustive minimum-cost assignment: every injective map from the smaller
/// side into the larger one is tried. Returns pairs (ref, pred) sorted by ref.
inline std::vector<std::pair<int, int>> brute_force_assignment(const std::vector<Vec3>& refs,
                                                               const std::vector<Vec3>& preds) {
  const int nr = static_cast<int>(refs.size()), np = static_cast<int>(preds.size());
  if (nr == 0 || np == 0) return {};
  const bool refs_small = nr <= np;
  const int small = refs_small ? nr : np, large = refs_small ? np : nr;
  std::vector<int> perm(large);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_map;
  // Enumerate permutations of the large side; the first `small` entries
  // define the map. Duplicate prefixes are harmless.
  do {
    double total = 0.0;
    for (int s = 0; s < small; ++s) {
      const int r = refs_small ? s : perm[s];
      const int p = refs_small ? perm[s] : s;
      total += angle_deg(refs[r], preds[p]);
    }
    if (total < best) {
      best = total;
      best_map.assign(perm.begin(), perm.begin() + small);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::vector<std::pair<int, int>> pairs;
  for (int s = 0; s < small; ++s) pairs.push_back(refs_small ? std::make_pair(s, best_map[s]) : std::make_pair(best_map[s], s));
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

inline double brute_force_min_cost(const std::vector<std::vector<double>>& cost) {
  const int rows = static_cast<int>(cost.size());
  const int cols = rows ? static_cast<int>(cost[0].size()) : 0;
  if (rows == 0 || cols == 0) return 0.0;
  const int small = std::min(rows, cols), large = std::max(rows, cols);
  std::vector<int> perm(large);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int s = 0; s < small; ++s) total += rows <= cols ? cost[s][perm[s]] : cost[perm[s]][s];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

struct Score {
  long tp = 0, fp = 0, fn = 0, s = 0, d = 0, i = 0, n_ref = 0, matched = 0;
  double err_sum = 0.0;
  double er() const { return static_cast<double>(s + d + i) / static_cast<double>(std::max<long>(n_ref, 1)); }
  double f() const {
    const long den = 2 * tp + fp + fn;
    return den ? 2.0 * static_cast<double>(tp) / static_cast<double>(den) : 0.0;
  }
  double le() const { return matched ? err_sum / static_cast<double>(matched) : 0.0; }
  double lr() const { return n_ref ? static_cast<double>(matched) / static_cast<double>(n_ref) : 1.0; }
};

inline Score brute_force_score(const EventList& ref, const EventList& pred, double threshold_deg,
                               int frames_per_segment = 10) {
  const auto rt = pooled_tracks(ref, frames_per_segment);
  const auto pt = pooled_tracks(pred, frames_per_segment);
  std::map<std::pair<int, int>, std::pair<std::vector<Vec3>, std::vector<Vec3>>> cells;
  for (const auto& [k, v] : rt) cells[{std::get<0>(k), std::get<1>(k)}].first.push_back(v);
  for (const auto& [k, v] : pt) cells[{std::get<0>(k), std::get<1>(k)}].second.push_back(v);

  Score sc;
  std::map<int, std::pair<long, long>> seg_fp_fn;
  for (const auto& [key, rp] : cells) {
    const auto& [refs, preds] = rp;
    const auto pairs = brute_force_assignment(refs, preds);
    long fp = 0, fn = 0;
    for (const auto& [r, p] : pairs) {
      const double e = angle_deg(refs[r], preds[p]);
      sc.err_sum += e;
      ++sc.matched;
      if (e <= threshold_deg)
        ++sc.tp;
      else {
        ++fp;
        ++fn;
      }
    }
    fp += static_cast<long>(preds.size() - pairs.size());
    fn += static_cast<long>(refs.size() - pairs.size());
    sc.fp += fp;
    sc.fn += fn;
    sc.n_ref += static_cast<long>(refs.size());
    seg_fp_fn[key.first].first += fp;
    seg_fp_fn[key.first].second += fn;
  }
  for (const auto& [seg, c] : seg_fp_fn) {
    const auto [fp, fn] = c;
    sc.s += std::min(fp, fn);
    sc.d += std::max(0L, fn - fp);
    sc.i += std::max(0L, fp - fn);
  }
  return sc;
}

/// X[k] = sum_n x[n] exp(-2 pi i k n / N) for k <= N/2.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x, int n_fft) {
  std::vector<std::complex<double>> out(n_fft / 2 + 1);
  for (int k = 0; k <= n_fft / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (int n = 0; n < static_cast<int>(x.size()) && n < n_fft; ++n)
      acc += x[n] * std::polar(1.0, -2.0 * std::numbers::pi * k * n / n_fft);
    out[k] = acc;
  }
  return out;
}

/// Periodic Hann window.
inline std::vector<double> hann(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

/// Lag maximizing the time-domain cross-correlation sum_n a[n] b[n + lag]
/// over |lag| <= max_lag. Positive lag means b lags a.
inline int xcorr_argmax(const std::vector<double>& a, const std::vector<double>& b, int max_lag) {
  int best_lag = 0;
  double best = -std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(a.size());
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      if (i + lag >= 0 && i + lag < n) acc += a[i] * b[i + lag];
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  return best_lag;
}

/// Same-padded 2-D cross-correlation, batch x in x T x F input, weights
/// out x in x kt x kf.
inline std::vector<double> naive_conv2d(const std::vector<double>& x, int n, int cin, int t, int f,
                                        const std::vector<double>& w, const std::vector<double>& b, int cout, int kt,
                                        int kf) {
  std::vector<double> y(static_cast<std::size_t>(n) * cout * t * f, 0.0);
  const int pt = kt / 2, pf = kf / 2;
  for (int bi = 0; bi < n; ++bi)
    for (int o = 0; o < cout; ++o)
      for (int ti = 0; ti < t; ++ti)
        for (int fi = 0; fi < f; ++fi) {
          double acc = b[o];
          for (int c = 0; c < cin; ++c)
            for (int a = 0; a < kt; ++a)
              for (int e = 0; e < kf; ++e) {
                const int ts = ti + a - pt, fs = fi + e - pf;
                if (ts < 0 || ts >= t || fs < 0 || fs >= f) continue;
                acc += w[((o * cin + c) * kt + a) * kf + e] * x[((bi * cin + c) * t + ts) * f + fs];
              }
          y[((bi * cout + o) * t + ti) * f + fi] = acc;
        }
  return y;
}

/// Scalar Adam reference.
struct ScalarAdam {
  double m = 0.0, v = 0.0;
  long t = 0;
  double step(double w, double g, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return w - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace oracle
