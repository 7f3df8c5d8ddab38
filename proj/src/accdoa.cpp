#include "seld/accdoa.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <tuple>

namespace seld {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

auto event_key(const Event& e) { return std::tuple(e.frame, e.class_index, e.track); }

}  // namespace

void sort_events(EventList& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return event_key(a) < event_key(b); });
}

void validate_events(const EventList& events, int num_classes) {
  EventList sorted = events;
  sort_events(sorted);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Event& e = sorted[i];
    if (e.frame < 0) throw std::invalid_argument("event frame index must be non-negative");
    if (e.class_index < 0 || e.class_index >= num_classes)
      throw std::invalid_argument("event class index " + std::to_string(e.class_index) + " out of range");
    if (e.track < 0) throw std::invalid_argument("event track index must be non-negative");
    if (!(e.azimuth_deg >= -180.0 && e.azimuth_deg < 180.0))
      throw std::invalid_argument("azimuth must lie in [-180, 180)");
    if (!(e.elevation_deg >= -90.0 && e.elevation_deg <= 90.0))
      throw std::invalid_argument("elevation must lie in [-90, 90]");
    if (i > 0 && event_key(sorted[i - 1]) == event_key(e))
      throw std::invalid_argument("duplicate (frame, class, track) record at frame " + std::to_string(e.frame));
  }
}

Vec3 sph_to_cart(double azimuth_deg, double elevation_deg) {
  const double az = azimuth_deg * kDeg;
  const double el = elevation_deg * kDeg;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

Direction cart_to_sph(const Vec3& v) {
  const double r = norm(v);
  if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("cart_to_sph: zero or non-finite vector");
  const double horiz = std::hypot(v[0], v[1]);
  Direction d;
  d.elevation_deg = std::atan2(v[2], horiz) / kDeg;
  d.azimuth_deg = horiz == 0.0 ? 0.0 : std::atan2(v[1], v[0]) / kDeg;
  // atan2 returns (-180, 180]; fold +180 onto -180 for the half-open range.
  if (d.azimuth_deg >= 180.0) d.azimuth_deg -= 360.0;
  return d;
}

std::vector<AccdoaFrame> encode(const EventList& events, int num_frames, int num_classes) {
  if (num_frames < 0 || num_classes <= 0) throw std::invalid_argument("encode: invalid dimensions");
  std::vector<AccdoaFrame> frames(static_cast<std::size_t>(num_frames), AccdoaFrame(num_classes));
  // Remember which track currently owns each (frame, class) cell.
  std::vector<int> owner(static_cast<std::size_t>(num_frames) * num_classes, -1);
  for (const Event& e : events) {
    if (e.frame < 0 || e.frame >= num_frames)
      throw std::out_of_range("encode: frame index " + std::to_string(e.frame) + " outside [0, " +
                              std::to_string(num_frames) + ")");
    if (e.class_index < 0 || e.class_index >= num_classes)
      throw std::out_of_range("encode: class index " + std::to_string(e.class_index) + " out of range");
    int& own = owner[static_cast<std::size_t>(e.frame) * num_classes + e.class_index];
    if (own != -1 && own <= e.track) continue;
    own = e.track;
    frames[e.frame].vectors[e.class_index] = sph_to_cart(e.azimuth_deg, e.elevation_deg);
  }
  return frames;
}

EventList decode(const std::vector<AccdoaFrame>& frames, const DecodeConfig& cfg) {
  if (!(cfg.activity_threshold > 0.0 && cfg.activity_threshold < 1.0))
    throw std::invalid_argument("activity threshold must lie in (0, 1)");
  EventList out;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& rows = frames[f].vectors;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (norm(rows[k]) <= cfg.activity_threshold) continue;
      const Direction d = cart_to_sph(rows[k]);
      out.push_back({static_cast<int>(f), static_cast<int>(k), 0, d.azimuth_deg, d.elevation_deg});
    }
  }
  return out;
}

}  // namespace seld
