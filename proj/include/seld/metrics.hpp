#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "seld/accdoa.hpp"

namespace seld {

/// Minimum-cost one-to-one assignment for a rows x cols cost matrix
/// (rectangular allowed). Returns, for each row, the assigned column or -1.
/// Exactly min(rows, cols) rows receive a column.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

/// Angle between two unit vectors, in degrees. Throws if either vector is
/// further than 1e-6 from unit length.
double angular_distance(const Vec3& u, const Vec3& v);

struct MatchedPair {
  int ref = 0;
  int pred = 0;
  double error_deg = 0.0;
};

struct ClassMatch {
  std::vector<MatchedPair> pairs;  // sorted by reference index
  std::vector<int> unmatched_refs;
  std::vector<int> unmatched_preds;
};

ClassMatch match_class_instances(const std::vector<Vec3>& refs, const std::vector<Vec3>& preds);

struct ThresholdConfig {
  double spatial_threshold_deg = 20.0;
};

struct MetricCounts {
  long tp = 0, fp = 0, fn = 0;
  long substitutions = 0, deletions = 0, insertions = 0;
  long n_ref = 0;
  long matched_pairs = 0;
  double error_sum_deg = 0.0;

  /// Micro-averaging across clips: counts are summed, then finalized.
  MetricCounts& operator+=(const MetricCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    n_ref += o.n_ref;
    matched_pairs += o.matched_pairs;
    error_sum_deg += o.error_sum_deg;
    return *this;
  }
};

struct MetricsReport {
  double er20 = 0.0;
  double f20 = 0.0;
  double le_cd = 0.0;
  double lr_cd = 0.0;
  MetricCounts counts;
  /// Set when 2TP + FP + FN = 0 and F20 is reported as 0.
  bool f_undefined = false;

  /// Aggregate selection score, lower is better:
  /// mean(ER, 1 - F, LE / 180, 1 - LR).
  double seld_score() const;
};

/// Instances of one class within one evaluation segment. Each instance is a
/// track pooled over the segment's label frames (mean direction, normalized).
struct SegmentClassInstances {
  int segment = 0;
  int class_index = 0;
  std::vector<Vec3> refs;
  std::vector<Vec3> preds;
};

/// Pools both lists into 1-second segments. Output is sorted by
/// (segment, class) and only holds cells where refs or preds are non-empty.
std::vector<SegmentClassInstances> pool_segments(const EventList& ref, const EventList& pred,
                                                 double label_rate_hz);

/// Folds the counts of one (segment, class) cell into `counts` and returns
/// the cell's FP and FN so the caller can form per-segment S/D/I.
struct CellOutcome {
  long fp = 0, fn = 0;
};
CellOutcome accumulate_cell(const SegmentClassInstances& cell, const ThresholdConfig& cfg, MetricCounts& counts);

MetricsReport finalize_report(const MetricCounts& counts);

MetricsReport score_segments(const EventList& ref, const EventList& pred, const ThresholdConfig& cfg,
                             double ref_label_rate_hz, double pred_label_rate_hz);

inline MetricsReport score_segments(const EventList& ref, const EventList& pred, const ThresholdConfig& cfg = {},
                                    double label_rate_hz = kLabelRateHz) {
  return score_segments(ref, pred, cfg, label_rate_hz, label_rate_hz);
}

/// Fixed-width table in the column order ER20, F20 (%), LE (deg), LR (%).
void print_report_table(std::ostream& os, const MetricsReport& report, const std::string& label = "");
std::string report_csv_header();
std::string report_csv_row(const MetricsReport& report);

}  // namespace seld
