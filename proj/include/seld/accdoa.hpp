#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace seld {

/// Default number of target classes (DCASE2021 task 3).
inline constexpr int kDefaultClasses = 12;
/// Label resolution: 10 label frames per second.
inline constexpr double kLabelRateHz = 10.0;
/// Feature frames (20 ms hop) per label frame (100 ms).
inline constexpr int kFeatureFramesPerLabel = 5;

using Vec3 = std::array<double, 3>;

struct Event {
  int frame = 0;
  int class_index = 0;
  int track = 0;
  double azimuth_deg = 0.0;    // [-180, 180)
  double elevation_deg = 0.0;  // [-90, 90]

  friend bool operator==(const Event&, const Event&) = default;
};

/// Per-frame, per-class, per-track DOA records.
using EventList = std::vector<Event>;

/// Sorts by (frame, class, track) and throws if a triple appears twice or a
/// field is out of range.
void validate_events(const EventList& events, int num_classes);
void sort_events(EventList& events);

/// K x 3 matrix of activity-coupled DOA vectors for one label frame.
struct AccdoaFrame {
  std::vector<Vec3> vectors;

  AccdoaFrame() = default;
  explicit AccdoaFrame(int num_classes) : vectors(static_cast<std::size_t>(num_classes), Vec3{0, 0, 0}) {}
  int num_classes() const { return static_cast<int>(vectors.size()); }
};

struct DecodeConfig {
  double activity_threshold = 0.5;
};

Vec3 sph_to_cart(double azimuth_deg, double elevation_deg);

struct Direction {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
};

/// Inverse of sph_to_cart for any non-zero vector. Azimuth in [-180, 180);
/// azimuth is reported as 0 at the poles.
Direction cart_to_sph(const Vec3& v);

double norm(const Vec3& v);

/// One frame per label frame. When several tracks of a class are active in
/// the same frame the lowest track index wins.
std::vector<AccdoaFrame> encode(const EventList& events, int num_frames, int num_classes);

/// Emits (frame, class) when the class vector is longer than the activity
/// threshold; track index is always 0.
EventList decode(const std::vector<AccdoaFrame>& frames, const DecodeConfig& cfg = {});

}  // namespace seld
