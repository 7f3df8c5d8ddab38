#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "seld/accdoa.hpp"
#include "seld/features.hpp"
#include "seld/io.hpp"

namespace seld {

enum class SourceKind { NoiseBurst, Tone };

struct SceneEvent {
  int class_index = 0;
  double onset_s = 0.0;
  double offset_s = 0.0;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  SourceKind kind = SourceKind::NoiseBurst;
  double snr_db = 30.0;
};

struct SceneSpec {
  double duration_s = 10.0;
  int sample_rate = 24000;
  int num_classes = kDefaultClasses;
  /// RMS of the diffuse noise; each event's level is noise_rms * 10^(snr/20).
  double noise_rms = 1e-3;
  /// When false the noise is left out but levels are still set relative to
  /// noise_rms.
  bool add_noise = true;
  std::uint64_t seed = 0;
  std::vector<SceneEvent> events;

  void validate() const;
  std::size_t num_samples() const;
  int num_label_frames() const;
};

struct ArrayGeometry {
  std::array<Vec3, 4> mic_positions{};
  double speed_of_sound = 343.0;

  /// Regular tetrahedron inscribed in a sphere of the given radius.
  static ArrayGeometry tetrahedron(double radius_m = 0.042);
  /// Spacing must stay below 0.2 m. Coincident microphones are allowed only
  /// when require_distinct is false (degenerate arrays used in tests).
  void validate(bool require_distinct = true) const;
};

/// Centre frequency of the spectral peak that characterises a class.
double class_center_hz(int class_index, int num_classes);

/// The mono source signal of one event, occupying [onset, offset) of a
/// scene-length buffer and zero elsewhere. Unit RMS over the active span
/// before the level implied by snr_db and the scene noise is applied.
std::vector<double> render_source(const SceneSpec& scene, std::size_t event_index);

/// Label-rate events (10 Hz) for a scene; a frame is active when its
/// midpoint lies in [onset, offset). Same-class overlaps receive
/// increasing track indices.
EventList scene_labels(const SceneSpec& scene);

struct SynthResult {
  AudioClip clip;
  EventList labels;
};

/// First-order ambisonic plane-wave encoding (ACN/SN3D): W = s,
/// X = s cos(el) cos(az), Y = s cos(el) sin(az), Z = s sin(el).
SynthResult synth_scene_foa(const SceneSpec& scene);

/// Far-field propagation to the array: mic m receives s(t - tau_m) with
/// tau_m = -(r_m . u) / c, realised by a 33-tap windowed-sinc fractional
/// delay.
SynthResult synth_scene_mic(const SceneSpec& scene, const ArrayGeometry& geometry);

/// y[n] = x(n - delay) for a real-valued delay in samples.
std::vector<double> fractional_delay(const std::vector<double>& x, double delay_samples);

// DCASE-style metadata: frame,class,track,azimuth,elevation per row.
void write_metadata(const EventList& events, const std::filesystem::path& path);
EventList read_metadata(const std::filesystem::path& path, int num_classes = kDefaultClasses);
EventList parse_metadata(const std::string& text, int num_classes = kDefaultClasses);

enum class Stage { Development, Evaluation };

struct FoldAssignment {
  Stage stage = Stage::Development;
  std::set<int> train_folds;
  std::set<int> val_folds;
  std::set<int> test_folds;
};

FoldAssignment make_folds(Stage stage);
Stage parse_stage(const std::string& name);

struct CorpusConfig {
  int n_scenes = 80;
  int fold_count = 8;
  std::uint64_t seed = 0;
  double duration_s = 10.0;
  int num_classes = kDefaultClasses;
  int min_events = 1;
  int max_events = 4;
  int max_polyphony = 2;
  double min_event_s = 1.0;
  double max_event_s = 3.0;
  int min_snr_db = 20;
  int max_snr_db = 30;
  int max_abs_elevation_deg = 45;
  double tone_probability = 0.0;
  double noise_rms = 1e-3;
  bool write_foa = true;
  bool write_mic = true;
  WavSampleFormat sample_format = WavSampleFormat::Float32;
  ArrayGeometry geometry = ArrayGeometry::tetrahedron();

  void validate() const;
};

struct CorpusEntry {
  std::string stem;  // file name without extension
  int fold = 0;
};

/// Scene `index` of the corpus; a pure function of (config, index).
SceneSpec corpus_scene(const CorpusConfig& cfg, int index);
int corpus_fold(const CorpusConfig& cfg, int index);

/// Writes foa/<stem>.wav, mic/<stem>.wav, metadata/<stem>.csv,
/// fold_manifest.csv and synth_config.json under `root`.
std::vector<CorpusEntry> make_corpus(const CorpusConfig& cfg, const std::filesystem::path& root);

std::vector<CorpusEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<CorpusEntry>& entries, const std::filesystem::path& path);

}  // namespace seld
