#include "seld/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>
#include <unsupported/Eigen/FFT>

namespace seld {

namespace {

constexpr double kBandLowHz = 500.0;
constexpr double kBandHighHz = 8000.0;
constexpr double kPeakWidthOctaves = 0.15;
constexpr double kBandFloor = 0.2;
constexpr double kFadeSeconds = 0.01;
constexpr int kSincHalfTaps = 16;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::size_t to_sample(double seconds, int rate) { return static_cast<std::size_t>(std::llround(seconds * rate)); }

void add_noise(std::vector<double>& ch, double rms, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, rms);
  for (double& s : ch) s += g(rng);
}

double signal_rms(const SceneSpec& scene, const SceneEvent& e) { return scene.noise_rms * std::pow(10.0, e.snr_db / 20.0); }

}  // namespace

void SceneSpec::validate() const {
  if (!(duration_s > 0.0)) throw std::invalid_argument("scene duration must be positive");
  if (sample_rate <= 0) throw std::invalid_argument("scene sample rate must be positive");
  if (!(noise_rms > 0.0)) throw std::invalid_argument("scene reference noise level must be positive");
  for (const SceneEvent& e : events) {
    if (!(e.onset_s >= 0.0 && e.onset_s < e.offset_s && e.offset_s <= duration_s))
      throw std::invalid_argument("scene event must satisfy 0 <= onset < offset <= duration");
    if (e.class_index < 0 || e.class_index >= num_classes) throw std::invalid_argument("scene event class out of range");
    if (!(e.azimuth_deg >= -180.0 && e.azimuth_deg < 180.0) || !(e.elevation_deg >= -90.0 && e.elevation_deg <= 90.0))
      throw std::invalid_argument("scene event direction out of range");
  }
}

std::size_t SceneSpec::num_samples() const { return to_sample(duration_s, sample_rate); }

int SceneSpec::num_label_frames() const { return static_cast<int>(std::llround(duration_s * kLabelRateHz)); }

ArrayGeometry ArrayGeometry::tetrahedron(double radius_m) {
  ArrayGeometry g;
  const double s = radius_m / std::sqrt(3.0);
  g.mic_positions = {Vec3{s, s, s}, Vec3{s, -s, -s}, Vec3{-s, s, -s}, Vec3{-s, -s, s}};
  return g;
}

void ArrayGeometry::validate(bool require_distinct) const {
  if (!(speed_of_sound > 0.0)) throw std::invalid_argument("speed of sound must be positive");
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      const Vec3 d{mic_positions[i][0] - mic_positions[j][0], mic_positions[i][1] - mic_positions[j][1],
                   mic_positions[i][2] - mic_positions[j][2]};
      const double dist = norm(d);
      if (!std::isfinite(dist)) throw std::invalid_argument("microphone positions must be finite");
      if (dist == 0.0 && require_distinct) throw std::invalid_argument("microphone positions must be distinct");
      if (dist >= 0.2) throw std::invalid_argument("microphone spacing must stay below 0.2 m");
    }
}

double class_center_hz(int class_index, int num_classes) {
  constexpr double lo = 700.0, hi = 6500.0;
  if (num_classes <= 1) return std::sqrt(lo * hi);
  return lo * std::pow(hi / lo, static_cast<double>(class_index) / (num_classes - 1));
}

std::vector<double> render_source(const SceneSpec& scene, std::size_t event_index) {
  const SceneEvent& e = scene.events.at(event_index);
  const std::size_t total = scene.num_samples();
  const std::size_t begin = std::min(to_sample(e.onset_s, scene.sample_rate), total);
  const std::size_t end = std::min(to_sample(e.offset_s, scene.sample_rate), total);
  std::vector<double> out(total, 0.0);
  if (end <= begin) return out;
  const std::size_t len = end - begin;

  std::mt19937_64 rng(mix_seed(scene.seed, 0x5EED0000u + event_index));
  const double fc = class_center_hz(e.class_index, scene.num_classes);
  std::vector<double> s(len);
  if (e.kind == SourceKind::Tone) {
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double phi = phase(rng);
    for (std::size_t n = 0; n < len; ++n)
      s[n] = std::sin(2.0 * std::numbers::pi * fc * static_cast<double>(n) / scene.sample_rate + phi);
  } else {
    std::size_t nfft = 1;
    while (nfft < len) nfft <<= 1;
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> white(nfft, 0.0);
    for (std::size_t n = 0; n < len; ++n) white[n] = g(rng);
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, white);
    for (std::size_t k = 0; k < nfft; ++k) {
      const std::size_t kk = std::min(k, nfft - k);
      const double f = static_cast<double>(kk) * scene.sample_rate / static_cast<double>(nfft);
      double gain = 0.0;
      if (f >= kBandLowHz && f <= kBandHighHz) {
        const double oct = std::log2(f / fc) / kPeakWidthOctaves;
        gain = kBandFloor + std::exp(-0.5 * oct * oct);
      }
      spec[k] *= gain;
    }
    std::vector<double> shaped;
    fft.inv(shaped, spec);
    std::copy_n(shaped.begin(), len, s.begin());
  }

  const std::size_t fade = std::min(len / 2, to_sample(kFadeSeconds, scene.sample_rate));
  for (std::size_t n = 0; n < fade; ++n) {
    const double w = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(n) / fade);
    s[n] *= w;
    s[len - 1 - n] *= w;
  }
  double energy = 0.0;
  for (double v : s) energy += v * v;
  const double rms = std::sqrt(energy / static_cast<double>(len));
  if (rms > 0.0)
    for (std::size_t n = 0; n < len; ++n) out[begin + n] = s[n] / rms;
  return out;
}

EventList scene_labels(const SceneSpec& scene) {
  // Track indices: lowest index not held by an overlapping same-class event.
  std::vector<std::size_t> order(scene.events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scene.events[a].onset_s < scene.events[b].onset_s; });
  std::vector<int> track(scene.events.size(), 0);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const SceneEvent& e = scene.events[order[oi]];
    std::vector<int> taken;
    for (std::size_t pj = 0; pj < oi; ++pj) {
      const SceneEvent& p = scene.events[order[pj]];
      if (p.class_index == e.class_index && p.offset_s > e.onset_s && p.onset_s < e.offset_s)
        taken.push_back(track[order[pj]]);
    }
    int t = 0;
    while (std::find(taken.begin(), taken.end(), t) != taken.end()) ++t;
    track[order[oi]] = t;
  }

  EventList labels;
  const int frames = scene.num_label_frames();
  for (std::size_t i = 0; i < scene.events.size(); ++i) {
    const SceneEvent& e = scene.events[i];
    for (int f = 0; f < frames; ++f) {
      const double mid = (f + 0.5) / kLabelRateHz;
      if (mid >= e.onset_s && mid < e.offset_s)
        labels.push_back({f, e.class_index, track[i], e.azimuth_deg, e.elevation_deg});
    }
  }
  sort_events(labels);
  return labels;
}

SynthResult synth_scene_foa(const SceneSpec& scene) {
  scene.validate();
  SynthResult r;
  r.clip.format = ClipFormat::Foa;
  r.clip.sample_rate = scene.sample_rate;
  r.clip.channels.assign(4, std::vector<double>(scene.num_samples(), 0.0));
  for (std::size_t i = 0; i < scene.events.size(); ++i) {
    const SceneEvent& e = scene.events[i];
    const std::vector<double> s = render_source(scene, i);
    const Vec3 u = sph_to_cart(e.azimuth_deg, e.elevation_deg);
    const double level = signal_rms(scene, e);
    const std::array<double, 4> gains{1.0, u[0], u[1], u[2]};
    for (int c = 0; c < 4; ++c) {
      auto& ch = r.clip.channels[c];
      for (std::size_t n = 0; n < s.size(); ++n) ch[n] += level * gains[c] * s[n];
    }
  }
  if (scene.add_noise) {
    // Diffuse field in SN3D: the dipole channels carry a third of the
    // omnidirectional power.
    std::mt19937_64 rng(mix_seed(scene.seed, 0xF0A));
    add_noise(r.clip.channels[0], scene.noise_rms, rng);
    for (int c = 1; c < 4; ++c) add_noise(r.clip.channels[c], scene.noise_rms / std::sqrt(3.0), rng);
  }
  r.labels = scene_labels(scene);
  return r;
}

std::vector<double> fractional_delay(const std::vector<double>& x, double delay_samples) {
  std::vector<double> y(x.size(), 0.0);
  const auto first = std::find_if(x.begin(), x.end(), [](double v) { return v != 0.0; });
  if (first == x.end()) return y;
  const auto last = std::find_if(x.rbegin(), x.rend(), [](double v) { return v != 0.0; });
  const long lo = first - x.begin();
  const long hi = static_cast<long>(x.size()) - (last - x.rbegin());  // exclusive

  const double whole = std::floor(delay_samples);
  const long di = static_cast<long>(whole);
  const double frac = delay_samples - whole;
  std::array<double, 2 * kSincHalfTaps + 1> taps{};
  const double half_width = kSincHalfTaps + 1.0;
  for (int j = -kSincHalfTaps; j <= kSincHalfTaps; ++j) {
    const double t = j - frac;
    const double sinc = t == 0.0 ? 1.0 : std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
    const double w = 0.42 + 0.5 * std::cos(std::numbers::pi * t / half_width) +
                     0.08 * std::cos(2.0 * std::numbers::pi * t / half_width);
    taps[j + kSincHalfTaps] = sinc * w;
  }
  // y[n] = sum_j x[n - di - j] * taps[j]
  const long n_begin = std::max<long>(0, lo + di - kSincHalfTaps);
  const long n_end = std::min<long>(static_cast<long>(x.size()), hi + di + kSincHalfTaps + 1);
  for (long n = n_begin; n < n_end; ++n) {
    double acc = 0.0;
    for (int j = -kSincHalfTaps; j <= kSincHalfTaps; ++j) {
      const long src = n - di - j;
      if (src < lo || src >= hi) continue;
      acc += x[src] * taps[j + kSincHalfTaps];
    }
    y[n] = acc;
  }
  return y;
}

SynthResult synth_scene_mic(const SceneSpec& scene, const ArrayGeometry& geometry) {
  scene.validate();
  geometry.validate(false);
  SynthResult r;
  r.clip.format = ClipFormat::Mic4;
  r.clip.sample_rate = scene.sample_rate;
  r.clip.channels.assign(4, std::vector<double>(scene.num_samples(), 0.0));
  for (std::size_t i = 0; i < scene.events.size(); ++i) {
    const SceneEvent& e = scene.events[i];
    std::vector<double> s = render_source(scene, i);
    const double level = signal_rms(scene, e);
    for (double& v : s) v *= level;
    const Vec3 u = sph_to_cart(e.azimuth_deg, e.elevation_deg);
    for (int m = 0; m < 4; ++m) {
      const Vec3& pos = geometry.mic_positions[m];
      const double tau = -(pos[0] * u[0] + pos[1] * u[1] + pos[2] * u[2]) / geometry.speed_of_sound;
      const std::vector<double> delayed = fractional_delay(s, tau * scene.sample_rate);
      auto& ch = r.clip.channels[m];
      for (std::size_t n = 0; n < ch.size(); ++n) ch[n] += delayed[n];
    }
  }
  if (scene.add_noise) {
    std::mt19937_64 rng(mix_seed(scene.seed, 0x3C4));
    for (auto& ch : r.clip.channels) add_noise(ch, scene.noise_rms, rng);
  }
  r.labels = scene_labels(scene);
  return r;
}

// ---------------------------------------------------------------------------
// Metadata

void write_metadata(const EventList& events, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  EventList sorted = events;
  sort_events(sorted);
  for (const Event& e : sorted) {
    long az = std::lround(e.azimuth_deg);
    if (az >= 180) az -= 360;
    out << e.frame << ',' << e.class_index << ',' << e.track << ',' << az << ',' << std::lround(e.elevation_deg)
        << '\n';
  }
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

namespace {

std::runtime_error row_error(int line, const std::string& what) {
  return std::runtime_error("metadata line " + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_field(std::string_view field, int line, const char* name) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
    throw row_error(line, std::string("malformed ") + name + " field '" + std::string(field) + "'");
  return value;
}

}  // namespace

EventList parse_metadata(const std::string& text, int num_classes) {
  EventList events;
  std::istringstream in(text);
  std::string row;
  int line = 0;
  while (std::getline(in, row)) {
    ++line;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(row);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 5) throw row_error(line, "expected 5 fields, found " + std::to_string(fields.size()));
    Event e;
    e.frame = parse_field<int>(fields[0], line, "frame");
    e.class_index = parse_field<int>(fields[1], line, "class");
    e.track = parse_field<int>(fields[2], line, "track");
    e.azimuth_deg = parse_field<double>(fields[3], line, "azimuth");
    e.elevation_deg = parse_field<double>(fields[4], line, "elevation");
    if (e.frame < 0) throw row_error(line, "negative frame index");
    if (e.class_index < 0 || e.class_index >= num_classes) throw row_error(line, "class index out of range");
    if (e.track < 0) throw row_error(line, "negative track index");
    if (!(e.azimuth_deg >= -180.0 && e.azimuth_deg < 180.0)) throw row_error(line, "azimuth outside [-180, 180)");
    if (!(e.elevation_deg >= -90.0 && e.elevation_deg <= 90.0)) throw row_error(line, "elevation outside [-90, 90]");
    events.push_back(e);
  }
  validate_events(events, num_classes);
  return events;
}

EventList read_metadata(const std::filesystem::path& path, int num_classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_metadata(buf.str(), num_classes);
  } catch (const std::exception& ex) {
    throw std::runtime_error(path.string() + ": " + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Folds and corpus

FoldAssignment make_folds(Stage stage) {
  FoldAssignment a;
  a.stage = stage;
  if (stage == Stage::Development) {
    a.train_folds = {3, 4, 5, 6};
    a.val_folds = {2};
    a.test_folds = {1};
  } else {
    a.train_folds = {2, 3, 4, 5, 6};
    a.val_folds = {1};
    a.test_folds = {7, 8};
  }
  return a;
}

Stage parse_stage(const std::string& name) {
  if (name == "development" || name == "dev") return Stage::Development;
  if (name == "evaluation" || name == "eval") return Stage::Evaluation;
  throw std::invalid_argument("unknown stage '" + name + "' (expected development or evaluation)");
}

void CorpusConfig::validate() const {
  if (n_scenes <= 0) throw std::invalid_argument("corpus needs at least one scene");
  if (fold_count <= 0) throw std::invalid_argument("corpus needs at least one fold");
  if (!(duration_s > 0.0)) throw std::invalid_argument("scene duration must be positive");
  if (min_events < 0 || max_events < min_events) throw std::invalid_argument("invalid event count range");
  if (max_polyphony < 1) throw std::invalid_argument("polyphony must be at least 1");
  if (!(min_event_s > 0.0) || max_event_s < min_event_s)
    throw std::invalid_argument("invalid event duration range");
  if (max_snr_db < min_snr_db) throw std::invalid_argument("invalid SNR range");
  if (max_abs_elevation_deg < 0 || max_abs_elevation_deg > 90) throw std::invalid_argument("invalid elevation range");
  if (num_classes <= 0) throw std::invalid_argument("class count must be positive");
  geometry.validate();
}

int corpus_fold(const CorpusConfig& cfg, int index) {
  return static_cast<int>(static_cast<long>(index) * cfg.fold_count / cfg.n_scenes) + 1;
}

SceneSpec corpus_scene(const CorpusConfig& cfg, int index) {
  SceneSpec scene;
  scene.duration_s = cfg.duration_s;
  scene.num_classes = cfg.num_classes;
  scene.noise_rms = cfg.noise_rms;
  scene.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(index));
  std::mt19937_64 rng(scene.seed);

  const int grid = static_cast<int>(std::llround(cfg.duration_s * kLabelRateHz));
  // Scenes shorter than the event range cap event length at the scene.
  const int min_len =
      std::min(grid, std::max(1, static_cast<int>(std::llround(cfg.min_event_s * kLabelRateHz))));
  const int max_len = std::max(min_len, static_cast<int>(std::llround(cfg.max_event_s * kLabelRateHz)));
  std::uniform_int_distribution<int> n_events_dist(cfg.min_events, cfg.max_events);
  std::uniform_int_distribution<int> class_dist(0, cfg.num_classes - 1);
  std::uniform_int_distribution<int> len_dist(min_len, std::min(max_len, grid));
  std::uniform_int_distribution<int> az_dist(-180, 179);
  std::uniform_int_distribution<int> el_dist(-cfg.max_abs_elevation_deg, cfg.max_abs_elevation_deg);
  std::uniform_int_distribution<int> snr_dist(cfg.min_snr_db, cfg.max_snr_db);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct Slot {
    int begin, end, cls;
  };
  std::vector<Slot> slots;
  const int wanted = n_events_dist(rng);
  for (int attempt = 0; attempt < 50 * std::max(wanted, 1) && static_cast<int>(slots.size()) < wanted; ++attempt) {
    const int cls = class_dist(rng);
    const int len = len_dist(rng);
    std::uniform_int_distribution<int> onset_dist(0, grid - len);
    const int begin = onset_dist(rng);
    const int end = begin + len;
    bool ok = true;
    for (int f = begin; f < end && ok; ++f) {
      int active = 0;
      for (const Slot& s : slots) {
        if (f >= s.begin && f < s.end) {
          ++active;
          if (s.cls == cls) ok = false;
        }
      }
      if (active >= cfg.max_polyphony) ok = false;
    }
    if (!ok) continue;
    slots.push_back({begin, end, cls});
    SceneEvent e;
    e.class_index = cls;
    e.onset_s = begin / kLabelRateHz;
    e.offset_s = end / kLabelRateHz;
    e.azimuth_deg = az_dist(rng);
    e.elevation_deg = el_dist(rng);
    e.snr_db = snr_dist(rng);
    e.kind = unit(rng) < cfg.tone_probability ? SourceKind::Tone : SourceKind::NoiseBurst;
    scene.events.push_back(e);
  }
  return scene;
}

void write_manifest(const std::vector<CorpusEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  for (const CorpusEntry& e : entries) out << e.stem << ".wav," << e.fold << '\n';
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::vector<CorpusEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::vector<CorpusEntry> entries;
  std::string row;
  int line = 0;
  while (std::getline(in, row)) {
    ++line;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(path.string() + " line " + std::to_string(line) + ": expected filename,fold_index");
    std::string name = row.substr(0, comma);
    const std::filesystem::path p(name);
    CorpusEntry e;
    e.stem = p.stem().string();
    try {
      e.fold = parse_field<int>(std::string_view(row).substr(comma + 1), line, "fold");
    } catch (const std::exception& ex) {
      throw std::runtime_error(path.string() + ": " + ex.what());
    }
    entries.push_back(e);
  }
  return entries;
}

std::vector<CorpusEntry> make_corpus(const CorpusConfig& cfg, const std::filesystem::path& root) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(root / "metadata");
  if (cfg.write_foa) fs::create_directories(root / "foa");
  if (cfg.write_mic) fs::create_directories(root / "mic");

  std::vector<CorpusEntry> entries;
  for (int i = 0; i < cfg.n_scenes; ++i) {
    const int fold = corpus_fold(cfg, i);
    char stem[64];
    std::snprintf(stem, sizeof stem, "fold%d_scene%04d", fold, i);
    const SceneSpec scene = corpus_scene(cfg, i);
    if (cfg.write_foa) write_wav(root / "foa" / (std::string(stem) + ".wav"), synth_scene_foa(scene).clip, cfg.sample_format);
    if (cfg.write_mic)
      write_wav(root / "mic" / (std::string(stem) + ".wav"), synth_scene_mic(scene, cfg.geometry).clip, cfg.sample_format);
    write_metadata(scene_labels(scene), root / "metadata" / (std::string(stem) + ".csv"));
    entries.push_back({stem, fold});
  }
  write_manifest(entries, root / "fold_manifest.csv");

  nlohmann::ordered_json j;
  j["n_scenes"] = cfg.n_scenes;
  j["fold_count"] = cfg.fold_count;
  j["seed"] = cfg.seed;
  j["duration_s"] = cfg.duration_s;
  j["num_classes"] = cfg.num_classes;
  j["events_per_scene"] = {cfg.min_events, cfg.max_events};
  j["max_polyphony"] = cfg.max_polyphony;
  j["event_seconds"] = {cfg.min_event_s, cfg.max_event_s};
  j["snr_db"] = {cfg.min_snr_db, cfg.max_snr_db};
  j["max_abs_elevation_deg"] = cfg.max_abs_elevation_deg;
  j["tone_probability"] = cfg.tone_probability;
  j["noise_rms"] = cfg.noise_rms;
  j["formats"] = nlohmann::json::array();
  if (cfg.write_foa) j["formats"].push_back("foa");
  if (cfg.write_mic) j["formats"].push_back("mic");
  j["sample_format"] = cfg.sample_format == WavSampleFormat::Pcm16 ? "pcm16" : "float32";
  j["speed_of_sound"] = cfg.geometry.speed_of_sound;
  j["mic_positions"] = cfg.geometry.mic_positions;
  std::ofstream(root / "synth_config.json") << j.dump(2) << '\n';
  return entries;
}

}  // namespace seld
