#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "eegflow/core.hpp"
#include "eegflow/imageio.hpp"
#include "eegflow/ingest.hpp"
#include "eegflow/jointtrain.hpp"
#include "eegflow/topomap.hpp"

namespace eegflow::synth {

/// Hemispherical cap of 49 electrodes: one vertex electrode plus four
/// rings of increasing colatitude.
inline ingest::Montage make_cap_montage() {
  ingest::Montage m;
  m.electrodes.push_back({"E00", 0.0, 0.0, 1.0});
  const std::array<double, 4> colat_deg{18.0, 36.0, 54.0, 72.0};
  const std::array<int, 4> ring_sizes{6, 10, 14, 18};
  int id = 1;
  for (std::size_t r = 0; r < colat_deg.size(); ++r) {
    const double colat = colat_deg[r] * M_PI / 180.0;
    for (int i = 0; i < ring_sizes[r]; ++i, ++id) {
      const double az = 2.0 * M_PI * i / ring_sizes[r];
      char name[16];
      std::snprintf(name, sizeof(name), "E%02d", id);
      m.electrodes.push_back({name, std::sin(colat) * std::cos(az),
                              std::sin(colat) * std::sin(az), std::cos(colat)});
    }
  }
  m.validate();
  return m;
}

struct SynthConfig {
  std::size_t classes = 12;
  std::size_t epochs_per_class = 5;
  double rate = 128.0;           // Hz
  std::size_t window = 169;      // L, samples per epoch
  std::size_t guard = 64;        // spacing before/after each epoch
  double carrier_hz = 10.0;      // alpha-band carrier so the pattern survives filtering
  double bump_sigma = 0.45;      // radians on the projected plane
  double travel = 1.2;           // radians traveled over one epoch
  double amplitude = 40.0;       // microvolts
  double noise = 4.0;            // pink-noise scale, microvolts
  std::uint64_t seed = 1;
};

namespace detail {

/// Voss-McCartney pink noise: several octave-spaced sample-and-hold rows.
class PinkNoise {
 public:
  explicit PinkNoise(Rng rng) : rng_(rng), rows_{} {
    for (double& r : rows_) r = rng_.normal();
  }
  double next() {
    ++counter_;
    for (std::size_t m = 0; m < rows_.size(); ++m)
      if (counter_ % (1ull << m) == 0) rows_[m] = rng_.normal();
    double acc = 0.0;
    for (double r : rows_) acc += r;
    return acc / std::sqrt(static_cast<double>(rows_.size()));
  }

 private:
  Rng rng_;
  std::array<double, 8> rows_;
  std::uint64_t counter_ = 0;
};

}  // namespace detail

/// Synthetic stimulus-locked recording: per epoch of class k, a Gaussian
/// activation bump travels across the scalp in direction 2*pi*k/K riding a
/// carrier oscillation, on top of per-channel pink noise. Stim code k+1
/// marks each epoch onset.
inline ingest::RawRecording generate_recording(const ingest::Montage& montage,
                                               const SynthConfig& cfg) {
  if (cfg.classes == 0 || cfg.epochs_per_class == 0)
    throw ValidationError("synthetic recording needs classes and epochs");
  const auto proj = topo::aep_project(montage, topo::vertex_center(montage));
  const std::size_t nch = montage.size();
  const std::size_t n_epochs = cfg.classes * cfg.epochs_per_class;
  const std::size_t stride = cfg.window + 2 * cfg.guard;
  const std::size_t total = n_epochs * stride + cfg.guard;

  ingest::RawRecording rec;
  rec.rate = cfg.rate;
  rec.data = Matrix(nch, total, 0.0);
  rec.stim.assign(total, 0);
  rec.montage_ref = "synthetic-cap";

  Rng root(cfg.seed);
  for (std::size_t c = 0; c < nch; ++c) {
    detail::PinkNoise pink(root.fork(100 + c));
    for (std::size_t t = 0; t < total; ++t) rec.data(c, t) = cfg.noise * pink.next();
  }

  // Epoch order interleaves classes so a split by index stays balanced.
  Rng phase_rng = root.fork(7);
  for (std::size_t e = 0; e < n_epochs; ++e) {
    const std::size_t klass = e % cfg.classes;
    const std::size_t onset = cfg.guard + e * stride;
    rec.stim[onset] = static_cast<int>(klass) + 1;

    const double dir = 2.0 * M_PI * static_cast<double>(klass) / static_cast<double>(cfg.classes);
    const double dx = std::cos(dir), dy = std::sin(dir);
    const double phase = phase_rng.uniform(0.0, 2.0 * M_PI);
    for (std::size_t t = 0; t < cfg.window; ++t) {
      const double frac = static_cast<double>(t) / static_cast<double>(cfg.window - 1);
      const double cx = (frac - 0.5) * cfg.travel * dx;
      const double cy = (frac - 0.5) * cfg.travel * dy;
      const double carrier =
          std::sin(2.0 * M_PI * cfg.carrier_hz * static_cast<double>(t) / cfg.rate + phase);
      for (std::size_t c = 0; c < nch; ++c) {
        const double du = proj.points[c][0] - cx;
        const double dv = proj.points[c][1] - cy;
        const double bump = std::exp(-0.5 * (du * du + dv * dv) / sqr(cfg.bump_sigma));
        rec.data(c, onset + t) += cfg.amplitude * bump * carrier;
      }
    }
  }
  return rec;
}

/// Event map for generate_recording: code k+1 -> class k.
inline std::map<int, int> synthetic_event_map(std::size_t classes) {
  std::map<int, int> m;
  for (std::size_t k = 0; k < classes; ++k) m[static_cast<int>(k) + 1] = static_cast<int>(k);
  return m;
}

inline void write_montage_csv(const std::string& path, const ingest::Montage& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  char buf[160];
  for (const auto& e : m.electrodes) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n", e.name.c_str(), e.x, e.y, e.z);
    out << buf;
  }
}

inline void write_recording_csv(const std::string& path, const ingest::RawRecording& rec,
                                const ingest::Montage& montage) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "time";
  for (const auto& e : montage.electrodes) out << "," << e.name;
  out << ",stim\n";
  char buf[64];
  for (std::size_t t = 0; t < rec.samples(); ++t) {
    std::snprintf(buf, sizeof(buf), "%.9f", static_cast<double>(t) / rec.rate);
    out << buf;
    for (std::size_t c = 0; c < rec.channels(); ++c) {
      std::snprintf(buf, sizeof(buf), ",%.9g", rec.data(c, t));
      out << buf;
    }
    out << "," << rec.stim[t] << "\n";
  }
  if (!out) throw IoError("short write to " + path);
}

/// Procedural stand-in for a small natural-image set: oriented gratings
/// with per-sample phase jitter and pixel noise, ten classes by default.
inline std::vector<joint::ImageSample> make_proxy_images(std::size_t classes,
                                                         std::size_t per_class, std::size_t side,
                                                         std::uint64_t seed) {
  std::vector<joint::ImageSample> out;
  Rng rng = Rng(seed).fork(21);
  for (std::size_t k = 0; k < classes; ++k) {
    const double angle = M_PI * static_cast<double>(k) / static_cast<double>(classes);
    const double fx = std::cos(angle), fy = std::sin(angle);
    for (std::size_t s = 0; s < per_class; ++s) {
      const double phase = rng.uniform(0.0, 2.0 * M_PI);
      const double freq = 2.0 * M_PI * rng.uniform(1.5, 2.5) / static_cast<double>(side);
      joint::ImageSample sample;
      sample.label = k;
      sample.pixels.resize(3 * side * side);
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          const double g =
              0.5 + 0.5 * std::sin(freq * (fx * static_cast<double>(x) +
                                           fy * static_cast<double>(y)) +
                                   phase);
          for (std::size_t ch = 0; ch < 3; ++ch) {
            const double shade = ch == 0 ? g : (ch == 1 ? 1.0 - g : 0.5);
            const double noisy = shade + 0.08 * rng.normal();
            sample.pixels[(ch * side + y) * side + x] = std::clamp(noisy, 0.0, 1.0);
          }
        }
      out.push_back(std::move(sample));
    }
  }
  return out;
}

/// Writes one PPM per sample plus labels.csv, the on-disk proxy format.
inline void write_proxy_dataset(const std::string& dir, std::size_t side,
                                const std::vector<joint::ImageSample>& samples) {
  std::ofstream labels(dir + "/labels.csv");
  if (!labels) throw IoError("cannot write " + dir + "/labels.csv");
  labels << "file,label\n";
  char name[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(name, sizeof(name), "img_%05zu.ppm", i);
    io::RgbImage img(side, side);
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x)
        for (std::size_t ch = 0; ch < 3; ++ch)
          img.at(y, x, ch) = static_cast<std::uint8_t>(
              std::nearbyint(255.0 * samples[i].pixels[(ch * side + y) * side + x]));
    io::write_ppm(dir + "/" + name, img);
    labels << name << "," << samples[i].label << "\n";
  }
}

/// Loads a proxy dataset directory (PPM files listed in labels.csv).
inline std::vector<joint::ImageSample> load_proxy_dataset(const std::string& dir,
                                                          std::size_t expect_side) {
  std::ifstream labels(dir + "/labels.csv");
  if (!labels)
    throw ValidationError("proxy image dataset not found: " + dir +
                          " (missing labels.csv)");
  std::string line;
  if (!std::getline(labels, line)) throw IoError(dir + "/labels.csv is empty");
  std::vector<joint::ImageSample> out;
  while (std::getline(labels, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError(dir + "/labels.csv: malformed row: " + line);
    const std::string file = line.substr(0, comma);
    const int label = std::stoi(line.substr(comma + 1));
    if (label < 0) throw ValidationError(dir + ": negative label for " + file);
    const io::RgbImage img = io::read_ppm(dir + "/" + file);
    if (img.rows != expect_side || img.cols != expect_side)
      throw ValidationError(dir + "/" + file + ": expected " + std::to_string(expect_side) +
                            "x" + std::to_string(expect_side));
    joint::ImageSample s;
    s.label = static_cast<std::size_t>(label);
    s.pixels.resize(3 * img.rows * img.cols);
    for (std::size_t y = 0; y < img.rows; ++y)
      for (std::size_t x = 0; x < img.cols; ++x)
        for (std::size_t ch = 0; ch < 3; ++ch)
          s.pixels[(ch * img.rows + y) * img.cols + x] = img.at(y, x, ch) / 255.0;
    out.push_back(std::move(s));
  }
  if (out.empty()) throw ValidationError(dir + ": no samples listed");
  return out;
}

/// Two-domain toy task for exercising the adversarial mechanism. Samples
/// come in cross-domain pairs that differ ONLY in channel 2, which carries
/// an opposite constant bias per domain: the separable nuisance is the one
/// domain signal, so suppressing it is exactly domain confusion.
struct TwoDomainTask {
  std::vector<joint::ImageSample> images;  // 3 x side x side, labels in {0,1}
  std::vector<nn::Vec> flows;              // same layout, other domain
  std::size_t side = 8;
};

inline TwoDomainTask make_two_domain_task(std::size_t per_domain, std::size_t side,
                                          std::uint64_t seed) {
  TwoDomainTask task;
  task.side = side;
  Rng rng = Rng(seed).fork(31);
  for (std::size_t i = 0; i < per_domain; ++i) {
    joint::ImageSample s;
    s.label = i % 2;
    s.pixels.assign(3 * side * side, 0.0);
    const double cx = (s.label == 0 ? 0.3 : 0.7) * static_cast<double>(side);
    const double cy = 0.5 * static_cast<double>(side) + rng.uniform(-1.0, 1.0);
    nn::Vec paired(3 * side * side, 0.0);
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) {
        const double d2 = sqr(static_cast<double>(x) - cx) + sqr(static_cast<double>(y) - cy);
        const double blob = std::exp(-0.5 * d2 / 2.25) + 0.05 * rng.normal();
        const double mid = 0.05 * rng.normal();
        const double jitter = 0.05 * rng.normal();
        s.pixels[(0 * side + y) * side + x] = blob;
        s.pixels[(1 * side + y) * side + x] = mid;
        s.pixels[(2 * side + y) * side + x] = +1.0 + jitter;
        paired[(0 * side + y) * side + x] = blob;
        paired[(1 * side + y) * side + x] = mid;
        paired[(2 * side + y) * side + x] = -1.0 + jitter;
      }
    task.images.push_back(std::move(s));
    task.flows.push_back(std::move(paired));
  }
  return task;
}

}  // namespace eegflow::synth
