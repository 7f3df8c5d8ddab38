#include "seld/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <tuple>

namespace seld {

// Shortest augmenting path with row/column potentials. Rows are processed
// one at a time; the matrix is transposed when rows > cols so every row can
// be assigned.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int rows = static_cast<int>(cost.size());
  const int cols = rows > 0 ? static_cast<int>(cost[0].size()) : 0;
  for (const auto& r : cost) {
    if (static_cast<int>(r.size()) != cols) throw std::invalid_argument("hungarian: ragged cost matrix");
    for (double c : r)
      if (!std::isfinite(c)) throw std::invalid_argument("hungarian: non-finite cost");
  }
  if (rows == 0) return {};
  if (cols == 0) return std::vector<int>(rows, -1);

  const bool transposed = rows > cols;
  const int n = transposed ? cols : rows;
  const int m = transposed ? rows : cols;
  auto a = [&](int i, int j) { return transposed ? cost[j][i] : cost[i][j]; };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> assignment(rows, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    if (transposed)
      assignment[j - 1] = p[j] - 1;
    else
      assignment[p[j] - 1] = j - 1;
  }
  return assignment;
}

double angular_distance(const Vec3& u, const Vec3& v) {
  constexpr double tol = 1e-6;
  if (std::abs(norm(u) - 1.0) > tol || std::abs(norm(v) - 1.0) > tol)
    throw std::invalid_argument("angular_distance: inputs must be unit vectors");
  // atan2 of |u x v| and u . v stays exact for (nearly) parallel vectors,
  // where acos loses everything below ~1e-6 degrees.
  const Vec3 c{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
  const double cross = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
  return std::atan2(cross, u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) * 180.0 / std::numbers::pi;
}

ClassMatch match_class_instances(const std::vector<Vec3>& refs, const std::vector<Vec3>& preds) {
  ClassMatch out;
  std::vector<std::vector<double>> cost(refs.size(), std::vector<double>(preds.size()));
  for (std::size_t r = 0; r < refs.size(); ++r)
    for (std::size_t p = 0; p < preds.size(); ++p) cost[r][p] = angular_distance(refs[r], preds[p]);

  const std::vector<int> assign = hungarian(cost);
  std::vector<char> pred_used(preds.size(), 0);
  for (std::size_t r = 0; r < refs.size(); ++r) {
    if (assign.empty() || assign[r] < 0) {
      out.unmatched_refs.push_back(static_cast<int>(r));
      continue;
    }
    pred_used[assign[r]] = 1;
    out.pairs.push_back({static_cast<int>(r), assign[r], cost[r][assign[r]]});
  }
  for (std::size_t p = 0; p < preds.size(); ++p)
    if (!pred_used[p]) out.unmatched_preds.push_back(static_cast<int>(p));
  return out;
}

double MetricsReport::seld_score() const {
  return (er20 + (1.0 - f20) + le_cd / 180.0 + (1.0 - lr_cd)) / 4.0;
}

namespace {

struct TrackAccumulator {
  Vec3 sum{0, 0, 0};
  Vec3 first{0, 0, 0};
  int frames = 0;
};

using CellKey = std::tuple<int, int>;                  // (segment, class)
using TrackKey = std::tuple<int, int, int>;            // (segment, class, track)

std::map<TrackKey, TrackAccumulator> pool_tracks(const EventList& events, double label_rate_hz) {
  const int frames_per_segment = static_cast<int>(std::lround(label_rate_hz));
  std::map<TrackKey, TrackAccumulator> tracks;
  for (const Event& e : events) {
    const Vec3 u = sph_to_cart(e.azimuth_deg, e.elevation_deg);
    auto& acc = tracks[{e.frame / frames_per_segment, e.class_index, e.track}];
    if (acc.frames == 0) acc.first = u;
    for (int i = 0; i < 3; ++i) acc.sum[i] += u[i];
    ++acc.frames;
  }
  return tracks;
}

Vec3 mean_direction(const TrackAccumulator& acc) {
  const double n = norm(acc.sum);
  if (n < 1e-9) return acc.first;
  return {acc.sum[0] / n, acc.sum[1] / n, acc.sum[2] / n};
}

}  // namespace

std::vector<SegmentClassInstances> pool_segments(const EventList& ref, const EventList& pred, double label_rate_hz) {
  const double rounded = std::round(label_rate_hz);
  if (!(label_rate_hz > 0.0) || std::abs(label_rate_hz - rounded) > 1e-9)
    throw std::invalid_argument("label rate must be a positive whole number of frames per second");

  std::map<CellKey, SegmentClassInstances> cells;
  for (const auto& [key, acc] : pool_tracks(ref, label_rate_hz)) {
    auto& cell = cells[{std::get<0>(key), std::get<1>(key)}];
    cell.refs.push_back(mean_direction(acc));
  }
  for (const auto& [key, acc] : pool_tracks(pred, label_rate_hz)) {
    auto& cell = cells[{std::get<0>(key), std::get<1>(key)}];
    cell.preds.push_back(mean_direction(acc));
  }
  std::vector<SegmentClassInstances> out;
  out.reserve(cells.size());
  for (auto& [key, cell] : cells) {
    cell.segment = std::get<0>(key);
    cell.class_index = std::get<1>(key);
    out.push_back(std::move(cell));
  }
  return out;
}

CellOutcome accumulate_cell(const SegmentClassInstances& cell, const ThresholdConfig& cfg, MetricCounts& counts) {
  const ClassMatch match = match_class_instances(cell.refs, cell.preds);
  CellOutcome outcome;
  for (const MatchedPair& pair : match.pairs) {
    counts.error_sum_deg += pair.error_deg;
    ++counts.matched_pairs;
    if (pair.error_deg <= cfg.spatial_threshold_deg) {
      ++counts.tp;
    } else {
      ++outcome.fp;
      ++outcome.fn;
    }
  }
  outcome.fp += static_cast<long>(match.unmatched_preds.size());
  outcome.fn += static_cast<long>(match.unmatched_refs.size());
  counts.fp += outcome.fp;
  counts.fn += outcome.fn;
  counts.n_ref += static_cast<long>(cell.refs.size());
  return outcome;
}

MetricsReport finalize_report(const MetricCounts& counts) {
  MetricsReport r;
  r.counts = counts;
  r.er20 = static_cast<double>(counts.substitutions + counts.deletions + counts.insertions) /
           static_cast<double>(std::max<long>(counts.n_ref, 1));
  const long f_den = 2 * counts.tp + counts.fp + counts.fn;
  r.f_undefined = f_den == 0;
  r.f20 = f_den > 0 ? 2.0 * static_cast<double>(counts.tp) / static_cast<double>(f_den) : 0.0;
  r.le_cd = counts.matched_pairs > 0 ? counts.error_sum_deg / static_cast<double>(counts.matched_pairs) : 0.0;
  r.lr_cd = counts.n_ref > 0 ? static_cast<double>(counts.matched_pairs) / static_cast<double>(counts.n_ref) : 1.0;
  return r;
}

MetricsReport score_segments(const EventList& ref, const EventList& pred, const ThresholdConfig& cfg,
                             double ref_label_rate_hz, double pred_label_rate_hz) {
  if (ref_label_rate_hz != pred_label_rate_hz)
    throw std::invalid_argument("score_segments: reference and prediction label rates differ");
  if (!(cfg.spatial_threshold_deg > 0.0 && cfg.spatial_threshold_deg <= 180.0))
    throw std::invalid_argument("spatial threshold must lie in (0, 180]");

  MetricCounts counts;
  const auto cells = pool_segments(ref, pred, ref_label_rate_hz);
  std::size_t i = 0;
  while (i < cells.size()) {
    const int segment = cells[i].segment;
    long seg_fp = 0, seg_fn = 0;
    for (; i < cells.size() && cells[i].segment == segment; ++i) {
      const CellOutcome o = accumulate_cell(cells[i], cfg, counts);
      seg_fp += o.fp;
      seg_fn += o.fn;
    }
    counts.substitutions += std::min(seg_fp, seg_fn);
    counts.deletions += std::max<long>(0, seg_fn - seg_fp);
    counts.insertions += std::max<long>(0, seg_fp - seg_fn);
  }
  return finalize_report(counts);
}

void print_report_table(std::ostream& os, const MetricsReport& r, const std::string& label) {
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %8s %8s %8s %8s\n", "", "ER20", "F20", "LE_CD", "LR_CD");
  os << line;
  std::snprintf(line, sizeof line, "%-16s %8.2f %7.1f%% %7.1f%s %7.1f%%\n", label.c_str(), r.er20, 100.0 * r.f20,
                r.le_cd, "\xC2\xB0", 100.0 * r.lr_cd);
  os << line;
  if (r.f_undefined) os << "note: no reference or predicted instances; F20 reported as 0\n";
}

std::string report_csv_header() { return "ER20,F20,LE,LR"; }

std::string report_csv_row(const MetricsReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.4f,%.2f,%.2f,%.2f", r.er20, 100.0 * r.f20, r.le_cd, 100.0 * r.lr_cd);
  return buf;
}

}  // namespace seld
