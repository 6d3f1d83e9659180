#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eegflow/bandfilter.hpp"
#include "eegflow/classifier.hpp"
#include "eegflow/container.hpp"
#include "eegflow/core.hpp"
#include "eegflow/imageio.hpp"
#include "eegflow/ingest.hpp"
#include "eegflow/jointtrain.hpp"
#include "eegflow/optflow.hpp"
#include "eegflow/synthetic.hpp"
#include "eegflow/topomap.hpp"

namespace eegflow::pipeline {

namespace fs = std::filesystem;

/// Every knob of the end-to-end pipeline. Defaults follow the reference
/// settings: 13 frames at 32x32, 50x resampling, 12 flow frames, LSTM
/// hidden size 128, dropout 0.25, 64 dense units, 10% test split.
struct PipelineConfig {
  // Inputs. Either file paths or the bundled synthetic generator.
  std::string recording;
  std::string montage;
  std::string proxy_dir;
  std::string out = "out";
  bool synthetic = false;
  std::size_t synth_classes = 12;
  std::size_t synth_epochs_per_class = 5;
  double synth_rate = 128.0;
  double synth_noise = 4.0;
  bool proxy_synthetic = false;
  std::size_t proxy_per_class = 12;
  std::string event_map;  // "code:class,code:class"; empty = synthetic map

  // Epoching and augmentation.
  std::size_t window = 0;  // 0 = frames * ceil(rate / frame_rate)
  double frame_rate = 10.0;
  std::size_t jitter = 6;
  std::size_t resample = 50;

  // Video and flow.
  std::size_t frames = 13;
  std::size_t grid = 32;
  bool frame_power = false;  // per-segment mean power instead of mean amplitude
  double flow_sigma = 1.1;
  int flow_radius = 3;
  int flow_smooth_radius = 5;
  int flow_iterations = 3;

  // Joint adversarial training.
  double alpha = 0.1;
  double joint_lr = 0.05;
  std::size_t joint_steps = 300;
  std::size_t joint_batch = 16;
  std::size_t image_classes = 10;
  std::size_t common_channels = 4;
  std::size_t flow_pool = 512;
  bool disc_updates_extractor = false;

  // Classifier.
  double cls_lr = 0.05;
  std::size_t cls_epochs = 40;
  std::size_t cls_batch = 16;
  std::size_t lstm_hidden = 128;
  std::size_t fc_hidden = 64;
  double dropout = 0.25;
  double test_fraction = 0.10;
  std::vector<double> fractions = {1.0, 0.5, 0.25};
  bool finetune_last_conv = false;

  std::uint64_t seed = 1;

  flow::FlowParams flow_params() const {
    return {flow_sigma, flow_radius, flow_smooth_radius, flow_iterations};
  }

  void validate() const {
    if (frames < 2) throw ValidationError("frames must be >= 2");
    if (grid % 4 != 0 || grid == 0)
      throw ValidationError("grid must be a positive multiple of 4");
    if (resample < 1) throw ValidationError("resample must be >= 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
      throw ValidationError("test_fraction must lie in (0, 1)");
    if (!(frame_rate > 0.0)) throw ValidationError("frame_rate must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
    if (fractions.empty()) throw ValidationError("fractions must not be empty");
    for (double f : fractions)
      if (!(f > 0.0 && f <= 1.0)) throw ValidationError("fractions must lie in (0, 1]");
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
      throw ValidationError("alpha must be finite and non-negative");
    if (synthetic) {
      if (synth_classes == 0 || synth_epochs_per_class == 0)
        throw ValidationError("synthetic generator needs classes and epochs per class");
    } else if (recording.empty() || montage.empty()) {
      throw ValidationError("recording and montage paths are required unless synthetic = true");
    }
  }
};

namespace detail {

inline std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof(b), "%.10g", v);
  return b;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config key '" + key + "' expects true/false, got '" + v + "'");
}

inline double parse_num(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "' expects a number, got '" + v + "'");
  }
}

}  // namespace detail

/// Parses the flat `key = value` config format ('#' starts a comment).
/// Unknown keys are rejected so typos surface immediately.
inline PipelineConfig parse_config_text(std::istream& in, const std::string& origin) {
  PipelineConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));

    auto num = [&] { return detail::parse_num(val, key); };
    auto unum = [&] { return static_cast<std::size_t>(detail::parse_num(val, key)); };
    if (key == "recording") c.recording = val;
    else if (key == "montage") c.montage = val;
    else if (key == "proxy_dir") c.proxy_dir = val;
    else if (key == "out") c.out = val;
    else if (key == "synthetic") c.synthetic = detail::parse_bool(val, key);
    else if (key == "synth_classes") c.synth_classes = unum();
    else if (key == "synth_epochs_per_class") c.synth_epochs_per_class = unum();
    else if (key == "synth_rate") c.synth_rate = num();
    else if (key == "synth_noise") c.synth_noise = num();
    else if (key == "proxy_synthetic") c.proxy_synthetic = detail::parse_bool(val, key);
    else if (key == "proxy_per_class") c.proxy_per_class = unum();
    else if (key == "event_map") c.event_map = val;
    else if (key == "window") c.window = unum();
    else if (key == "frame_rate") c.frame_rate = num();
    else if (key == "jitter") c.jitter = unum();
    else if (key == "resample") c.resample = unum();
    else if (key == "frames") c.frames = unum();
    else if (key == "grid") c.grid = unum();
    else if (key == "frame_power") c.frame_power = detail::parse_bool(val, key);
    else if (key == "flow_sigma") c.flow_sigma = num();
    else if (key == "flow_radius") c.flow_radius = static_cast<int>(num());
    else if (key == "flow_smooth_radius") c.flow_smooth_radius = static_cast<int>(num());
    else if (key == "flow_iterations") c.flow_iterations = static_cast<int>(num());
    else if (key == "alpha") c.alpha = num();
    else if (key == "joint_lr") c.joint_lr = num();
    else if (key == "joint_steps") c.joint_steps = unum();
    else if (key == "joint_batch") c.joint_batch = unum();
    else if (key == "image_classes") c.image_classes = unum();
    else if (key == "common_channels") c.common_channels = unum();
    else if (key == "flow_pool") c.flow_pool = unum();
    else if (key == "disc_updates_extractor") c.disc_updates_extractor = detail::parse_bool(val, key);
    else if (key == "cls_lr") c.cls_lr = num();
    else if (key == "cls_epochs") c.cls_epochs = unum();
    else if (key == "cls_batch") c.cls_batch = unum();
    else if (key == "lstm_hidden") c.lstm_hidden = unum();
    else if (key == "fc_hidden") c.fc_hidden = unum();
    else if (key == "dropout") c.dropout = num();
    else if (key == "test_fraction") c.test_fraction = num();
    else if (key == "finetune_last_conv") c.finetune_last_conv = detail::parse_bool(val, key);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(detail::parse_num(val, key));
    else if (key == "fractions") {
      c.fractions.clear();
      std::stringstream ss(val);
      std::string tok;
      while (std::getline(ss, tok, ','))
        c.fractions.push_back(detail::parse_num(detail::trim(tok), key) / 100.0);
    } else {
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": unknown config key '" +
                            key + "'");
    }
  }
  return c;
}

inline PipelineConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  return parse_config_text(in, path);
}

namespace detail {

inline std::map<int, int> parse_event_map(const std::string& text) {
  std::map<int, int> m;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos)
      throw ValidationError("event_map entry '" + tok + "' must be code:class");
    m[std::stoi(trim(tok.substr(0, colon)))] = std::stoi(trim(tok.substr(colon + 1)));
  }
  return m;
}

struct Inputs {
  ingest::Montage montage;
  ingest::RawRecording rec;
  std::map<int, int> events;
};

inline Inputs prepare_inputs(const PipelineConfig& cfg, bool write_copies) {
  Inputs in;
  if (cfg.synthetic) {
    in.montage = synth::make_cap_montage();
    synth::SynthConfig sc;
    sc.classes = cfg.synth_classes;
    sc.epochs_per_class = cfg.synth_epochs_per_class;
    sc.rate = cfg.synth_rate;
    sc.noise = cfg.synth_noise;
    sc.window = cfg.window != 0
                    ? cfg.window
                    : cfg.frames * static_cast<std::size_t>(std::ceil(cfg.synth_rate / cfg.frame_rate));
    sc.guard = cfg.jitter + 48;
    sc.seed = cfg.seed;
    in.rec = synth::generate_recording(in.montage, sc);
    in.events = synth::synthetic_event_map(cfg.synth_classes);
    if (write_copies) {
      synth::write_montage_csv(cfg.out + "/montage.csv", in.montage);
      synth::write_recording_csv(cfg.out + "/recording.csv", in.rec, in.montage);
    }
  } else {
    in.montage = ingest::load_montage(cfg.montage);
    in.rec = ingest::load_recording(cfg.recording, in.montage);
    in.rec.montage_ref = cfg.montage;
    if (cfg.event_map.empty())
      throw ValidationError("event_map is required for file-based recordings");
    in.events = parse_event_map(cfg.event_map);
  }
  return in;
}

inline std::size_t resolved_window(const PipelineConfig& cfg, double rate) {
  if (cfg.window != 0) return cfg.window;
  return cfg.frames * static_cast<std::size_t>(std::ceil(rate / cfg.frame_rate));
}

struct Extraction {
  std::vector<ingest::ResampledEpoch> epochs;
  std::vector<std::int64_t> drop_onsets;
  std::size_t sources = 0;
  std::size_t window = 0;
};

/// Cuts padded windows (L + 2J, starting J samples before each onset) so
/// the resampler can jitter inside real signal, then resamples.
inline Extraction extract_all(const PipelineConfig& cfg, const Inputs& in) {
  Extraction ex;
  ex.window = resolved_window(cfg, in.rec.rate);
  const std::size_t padded_len = ex.window + 2 * cfg.jitter;
  std::vector<ingest::Epoch> padded;
  for (std::size_t s = 0; s < in.rec.stim.size(); ++s) {
    const int code = in.rec.stim[s];
    if (code == 0) continue;
    const auto it = in.events.find(code);
    if (it == in.events.end())
      throw ValidationError("stim code " + std::to_string(code) + " missing from event_map");
    if (s < cfg.jitter || s - cfg.jitter + padded_len > in.rec.samples()) {
      ex.drop_onsets.push_back(static_cast<std::int64_t>(s));
      continue;
    }
    ingest::Epoch e;
    e.label = it->second;
    e.onset_sample = static_cast<std::int64_t>(s);
    e.data = Matrix(in.rec.channels(), padded_len);
    const std::size_t start = s - cfg.jitter;
    for (std::size_t c = 0; c < in.rec.channels(); ++c)
      for (std::size_t t = 0; t < padded_len; ++t) e.data(c, t) = in.rec.data(c, start + t);
    padded.push_back(std::move(e));
  }
  ex.sources = padded.size();
  ex.epochs = ingest::resample_epochs(padded, ex.window, cfg.resample, cfg.jitter, cfg.seed);
  return ex;
}

struct Renderer {
  topo::ProjectedMontage projection;
  topo::CtInterpolator interp;
  topo::GridSampler sampler;

  Renderer(const ingest::Montage& montage, std::size_t grid_n)
      : projection(topo::aep_project(montage, topo::vertex_center(montage))),
        interp(projection.points),
        sampler(interp, topo::make_grid(projection.points, grid_n)) {}
};

inline flow::FlowVideo convert_epoch(const ingest::Epoch& epoch, double rate,
                                     const Renderer& renderer, const PipelineConfig& cfg) {
  const auto stacked = bands::rhythm_stack(epoch.data, rate);
  const auto video =
      topo::render_video(stacked, renderer.interp, renderer.sampler, cfg.frames, cfg.frame_power);
  return flow::video_to_flow(video, cfg.flow_params());
}

inline std::string container_path(const std::string& out, std::size_t id) {
  char name[48];
  std::snprintf(name, sizeof(name), "epoch_%06zu.eegf", id);
  return out + "/flow/" + name;
}

struct ManifestRow {
  std::size_t id = 0;
  int label = 0;
  std::size_t source = 0;
  std::int64_t offset = 0;
  std::int64_t onset = 0;
};

inline void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,label,source,offset,onset\n";
  for (const auto& r : rows)
    out << r.id << "," << r.label << "," << r.source << "," << r.offset << "," << r.onset << "\n";
}

inline std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("manifest not found: " + path + " (run `convert` first)");
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + " is empty");
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ManifestRow r;
    if (std::sscanf(line.c_str(), "%zu,%d,%zu,%lld,%lld", &r.id, &r.label, &r.source,
                    reinterpret_cast<long long*>(&r.offset),
                    reinterpret_cast<long long*>(&r.onset)) != 5)
      throw IoError(path + ": malformed row: " + line);
    rows.push_back(r);
  }
  return rows;
}

inline void write_drops(const std::string& path, const std::vector<std::int64_t>& onsets) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "onset,reason\n";
  for (auto s : onsets) out << s << ",window_overrun\n";
}

/// Builds the 2-channel-per-band extractor input for one flow frame.
inline nn::Vec flow_frame_input(const flow::FlowVideo& v, std::size_t pair) {
  const std::size_t bands_n = v.band_count();
  const std::size_t h = v.fields[0][0].dx.rows(), w = v.fields[0][0].dx.cols();
  nn::Vec px(2 * bands_n * h * w);
  for (std::size_t b = 0; b < bands_n; ++b) {
    const auto& f = v.fields[b][pair];
    std::copy(f.dx.raw().begin(), f.dx.raw().end(), px.begin() + static_cast<std::ptrdiff_t>((2 * b) * h * w));
    std::copy(f.dy.raw().begin(), f.dy.raw().end(),
              px.begin() + static_cast<std::ptrdiff_t>((2 * b + 1) * h * w));
  }
  return px;
}

struct SourceSplit {
  std::vector<std::size_t> train_rows;   // manifest indices
  std::vector<std::size_t> test_rows;    // one representative per held-out source
  std::vector<std::size_t> train_sources;
};

/// Held-out sources supply the test set; only training sources keep their
/// resampled variants, so augmentation never leaks across the split. Each
/// test source is represented by its least-jittered variant.
inline SourceSplit split_by_source(const std::vector<ManifestRow>& rows, double test_fraction,
                                   std::uint64_t seed) {
  std::set<std::size_t> source_set;
  for (const auto& r : rows) source_set.insert(r.source);
  std::vector<std::size_t> sources(source_set.begin(), source_set.end());
  Rng rng = Rng(seed).fork(41);
  rng.shuffle(sources);
  const std::size_t n_test =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                   test_fraction * static_cast<double>(sources.size()))));
  if (n_test >= sources.size())
    throw ValidationError("test fraction leaves no training sources");
  std::set<std::size_t> test_sources(sources.begin(),
                                     sources.begin() + static_cast<std::ptrdiff_t>(n_test));

  SourceSplit split;
  split.train_sources.assign(sources.begin() + static_cast<std::ptrdiff_t>(n_test), sources.end());
  std::map<std::size_t, std::size_t> rep;  // source -> manifest index of representative
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!test_sources.count(rows[i].source)) {
      split.train_rows.push_back(i);
      continue;
    }
    const auto it = rep.find(rows[i].source);
    if (it == rep.end() || std::llabs(rows[i].offset) < std::llabs(rows[it->second].offset))
      rep[rows[i].source] = i;
  }
  for (const auto& [src, idx] : rep) split.test_rows.push_back(idx);
  std::sort(split.test_rows.begin(), split.test_rows.end());
  return split;
}

}  // namespace detail

struct ConvertResult {
  std::size_t containers = 0;
  std::size_t dropped = 0;
  std::size_t sources = 0;
};

/// ingest -> band filter -> topographic video -> optical flow, one
/// container per resampled epoch plus manifest.csv and drops.csv.
inline ConvertResult cmd_convert(const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out + "/flow");
  const auto inputs = detail::prepare_inputs(cfg, /*write_copies=*/true);
  const auto ex = detail::extract_all(cfg, inputs);

  std::vector<detail::ManifestRow> rows;
  if (!ex.epochs.empty()) {
    const detail::Renderer renderer(inputs.montage, cfg.grid);
    for (std::size_t i = 0; i < ex.epochs.size(); ++i) {
      const auto& re = ex.epochs[i];
      const auto fv = detail::convert_epoch(re.epoch, inputs.rec.rate, renderer, cfg);
      io::write_flow_container(detail::container_path(cfg.out, i), fv);
      rows.push_back({i, re.epoch.label, re.source_index, re.offset, re.epoch.onset_sample});
    }
  }
  detail::write_manifest(cfg.out + "/manifest.csv", rows);
  detail::write_drops(cfg.out + "/drops.csv", ex.drop_onsets);

  return {rows.size(), ex.drop_onsets.size(), ex.sources};
}

namespace detail {

inline std::vector<joint::ImageSample> prepare_proxy_images(const PipelineConfig& cfg) {
  std::string dir = cfg.proxy_dir;
  if (dir.empty()) {
    if (!cfg.proxy_synthetic)
      throw ValidationError(
          "proxy image dataset is required: set proxy_dir to a directory of PPM files with "
          "labels.csv, or proxy_synthetic = true");
    dir = cfg.out + "/proxy";
    fs::create_directories(dir);
    const auto samples =
        synth::make_proxy_images(cfg.image_classes, cfg.proxy_per_class, cfg.grid, cfg.seed);
    synth::write_proxy_dataset(dir, cfg.grid, samples);
  }
  return synth::load_proxy_dataset(dir, cfg.grid);
}

inline joint::JointConfig joint_config(const PipelineConfig& cfg) {
  joint::JointConfig jc;
  jc.alpha = cfg.alpha;
  jc.lr = cfg.joint_lr;
  jc.disc_lr = cfg.joint_lr;
  jc.steps = cfg.joint_steps;
  jc.batch_per_domain = cfg.joint_batch;
  jc.seed = cfg.seed;
  jc.disc_updates_extractor = cfg.disc_updates_extractor;
  jc.image_classes = cfg.image_classes;
  jc.extractor = {3, 2 * bands::kBandCount, cfg.common_channels, cfg.grid, cfg.grid};
  return jc;
}

/// Evenly strided subsample of all (row, pair) flow frames for the joint
/// training pool.
inline std::vector<nn::Vec> build_flow_pool(const PipelineConfig& cfg,
                                            const std::vector<ManifestRow>& rows,
                                            const std::vector<std::size_t>& row_indices) {
  std::vector<nn::Vec> pool;
  if (row_indices.empty()) return pool;
  std::size_t pairs = 0;
  {
    const auto v = io::read_flow_container(container_path(cfg.out, rows[row_indices[0]].id));
    pairs = v.pair_count();
  }
  const std::size_t total = row_indices.size() * pairs;
  const std::size_t want = std::min<std::size_t>(std::max<std::size_t>(cfg.flow_pool, 1), total);
  const std::size_t stride = std::max<std::size_t>(1, total / want);
  std::size_t cursor = 0;
  for (std::size_t ri = 0; ri < row_indices.size() && pool.size() < want; ++ri) {
    const std::size_t lo = ri * pairs, hi = lo + pairs;
    if (cursor >= hi) continue;
    const auto v = io::read_flow_container(container_path(cfg.out, rows[row_indices[ri]].id));
    while (cursor < hi && pool.size() < want) {
      pool.push_back(flow_frame_input(v, cursor - lo));
      cursor += stride;
    }
  }
  return pool;
}

/// Extractor features for the listed manifest rows; one container read per
/// row, 12 feature vectors per epoch.
inline std::map<std::size_t, cls::SequenceSample> compute_features(
    const PipelineConfig& cfg, const std::vector<ManifestRow>& rows,
    const std::vector<std::size_t>& row_indices, joint::FeatureExtractor& extractor) {
  std::map<std::size_t, cls::SequenceSample> out;
  for (std::size_t ri : row_indices) {
    const auto& row = rows[ri];
    const auto v = io::read_flow_container(container_path(cfg.out, row.id));
    cls::SequenceSample s;
    s.label = static_cast<std::size_t>(row.label);
    for (std::size_t p = 0; p < v.pair_count(); ++p)
      s.features.push_back(extractor.forward(flow_frame_input(v, p), joint::Domain::flow));
    out.emplace(ri, std::move(s));
  }
  return out;
}

inline void write_joint_log(const std::string& path, const std::vector<joint::JointLogRow>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "step,L_img,L_adver_confusion,L_disc,disc_accuracy\n";
  for (const auto& r : log)
    out << r.step << "," << fmt(r.loss_img) << "," << fmt(r.loss_confusion) << ","
        << fmt(r.loss_disc) << "," << fmt(r.disc_accuracy) << "\n";
}

inline void write_cls_log(const std::string& path, const std::vector<cls::EpochLogRow>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,loss,train_accuracy\n";
  for (const auto& r : log)
    out << r.epoch << "," << fmt(r.loss) << "," << fmt(r.train_accuracy) << "\n";
}

inline void write_eval_report(const std::string& path, const cls::EvalReport& rep) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& row : rep.confusion) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << "\n";
  }
  out << "accuracy=" << fmt(rep.accuracy) << "\n";
}

inline std::optional<cls::EvalReport> read_eval_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  cls::EvalReport rep;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("accuracy=", 0) == 0) {
      rep.accuracy = std::stod(line.substr(9));
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::size_t> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) row.push_back(static_cast<std::size_t>(std::stoull(tok)));
    rep.confusion.push_back(std::move(row));
  }
  return rep;
}

struct ClassifierRun {
  cls::EvalReport report;
  std::vector<cls::EpochLogRow> log;
  std::optional<cls::ClassifierNet> net;
};

/// Trains and evaluates the sequence classifier on precomputed features.
inline ClassifierRun run_classifier(const PipelineConfig& cfg, std::size_t classes,
                                    std::size_t feature_dim,
                                    const std::map<std::size_t, cls::SequenceSample>& features,
                                    const std::vector<std::size_t>& train_rows,
                                    const std::vector<std::size_t>& test_rows) {
  std::vector<cls::SequenceSample> train, test;
  for (std::size_t i : train_rows) train.push_back(features.at(i));
  for (std::size_t i : test_rows) test.push_back(features.at(i));

  cls::ClassifierConfig cc{feature_dim, classes, cfg.lstm_hidden, cfg.fc_hidden, cfg.dropout};
  Rng init = Rng(cfg.seed).fork(10);
  ClassifierRun run;
  run.net.emplace(cc, init);
  cls::TrainConfig tc{cfg.cls_lr, cfg.cls_epochs, cfg.cls_batch, cfg.seed};
  run.log = cls::train_classifier(*run.net, train, tc);
  run.report = cls::evaluate(*run.net, test);
  return run;
}

/// Fine-tuning variant: the last extractor conv layer receives gradients
/// through the classifier. Raw flow-frame inputs are cached in memory, so
/// this path suits small experiments.
inline ClassifierRun run_classifier_finetune(const PipelineConfig& cfg, std::size_t classes,
                                             const std::vector<ManifestRow>& rows,
                                             const std::vector<std::size_t>& train_rows,
                                             const std::vector<std::size_t>& test_rows,
                                             joint::FeatureExtractor& extractor) {
  auto load_inputs = [&](const std::vector<std::size_t>& idxs) {
    std::vector<std::vector<nn::Vec>> out;
    for (std::size_t ri : idxs) {
      const auto v = io::read_flow_container(container_path(cfg.out, rows[ri].id));
      std::vector<nn::Vec> frames;
      for (std::size_t p = 0; p < v.pair_count(); ++p) frames.push_back(flow_frame_input(v, p));
      out.push_back(std::move(frames));
    }
    return out;
  };
  const auto train_inputs = load_inputs(train_rows);
  const auto test_inputs = load_inputs(test_rows);

  cls::ClassifierConfig cc{extractor.feature_dim(), classes, cfg.lstm_hidden, cfg.fc_hidden,
                           cfg.dropout};
  Rng init = Rng(cfg.seed).fork(10);
  ClassifierRun run;
  run.net.emplace(cc, init);
  auto cls_params = run.net->params();
  auto extr_params = extractor.last_conv_params();
  std::vector<nn::ParamRef> all = cls_params;
  all.insert(all.end(), extr_params.begin(), extr_params.end());

  Rng root(cfg.seed);
  Rng order_rng = root.fork(11);
  Rng drop_rng = root.fork(12);
  std::vector<std::size_t> order(train_inputs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.cls_epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t done = 0;
    while (done < order.size()) {
      const std::size_t take = std::min(cfg.cls_batch, order.size() - done);
      nn::zero_grads(all);
      for (std::size_t k = 0; k < take; ++k) {
        const std::size_t si = order[done + k];
        std::vector<nn::Vec> feats;
        for (const auto& frame : train_inputs[si])
          feats.push_back(extractor.forward(frame, joint::Domain::flow));
        const auto label = static_cast<std::size_t>(rows[train_rows[si]].label);
        const nn::Vec probs = run.net->forward(feats, true, drop_rng);
        loss_sum += nn::cross_entropy(probs, label);
        const auto dseq = run.net->backward(probs, label, 1.0 / static_cast<double>(take));
        for (std::size_t t = 0; t < dseq.size(); ++t) {
          extractor.forward(train_inputs[si][t], joint::Domain::flow);  // re-prime caches
          extractor.backward_last_conv_only(dseq[t]);
        }
      }
      nn::sgd_step(all, cfg.cls_lr, 1.0);
      done += take;
    }
    nn::zero_grads(all);
    const double mean_loss = loss_sum / static_cast<double>(train_inputs.size());
    if (!std::isfinite(mean_loss) || mean_loss > 1e4)
      throw NumericError("fine-tuning diverged at epoch " + std::to_string(epoch));
    run.log.push_back({epoch, mean_loss, 0.0});
  }

  std::vector<cls::SequenceSample> test;
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    cls::SequenceSample s;
    s.label = static_cast<std::size_t>(rows[test_rows[i]].label);
    for (const auto& frame : test_inputs[i])
      s.features.push_back(extractor.forward(frame, joint::Domain::flow));
    test.push_back(std::move(s));
  }
  run.report = cls::evaluate(*run.net, test);
  return run;
}

}  // namespace detail

struct TrainResult {
  double accuracy = 0.0;
  cls::EvalReport report;
};

/// Joint adversarial training of the extractor followed by classifier
/// training on the extracted flow features. Writes the model snapshot,
/// both training logs and the evaluation report.
inline TrainResult cmd_train(const PipelineConfig& cfg) {
  cfg.validate();
  const auto rows = detail::read_manifest(cfg.out + "/manifest.csv");
  if (rows.empty()) throw ValidationError("manifest is empty; nothing to train on");
  const auto images = detail::prepare_proxy_images(cfg);

  std::size_t classes = 0;
  for (const auto& r : rows) classes = std::max(classes, static_cast<std::size_t>(r.label) + 1);

  const auto split = detail::split_by_source(rows, cfg.test_fraction, cfg.seed);
  const auto flow_pool = detail::build_flow_pool(cfg, rows, split.train_rows);
  if (flow_pool.empty()) throw ValidationError("no training flow frames available");

  auto joint_res = joint::joint_train(images, flow_pool, detail::joint_config(cfg));
  detail::write_joint_log(cfg.out + "/joint_log.csv", joint_res.log);

  detail::ClassifierRun run;
  if (cfg.finetune_last_conv) {
    run = detail::run_classifier_finetune(cfg, classes, rows, split.train_rows, split.test_rows,
                                          joint_res.model.extractor);
  } else {
    std::vector<std::size_t> all_rows = split.train_rows;
    all_rows.insert(all_rows.end(), split.test_rows.begin(), split.test_rows.end());
    const auto features =
        detail::compute_features(cfg, rows, all_rows, joint_res.model.extractor);
    run = detail::run_classifier(cfg, classes, joint_res.model.extractor.feature_dim(), features,
                                 split.train_rows, split.test_rows);
  }
  detail::write_cls_log(cfg.out + "/classifier_log.csv", run.log);
  detail::write_eval_report(cfg.out + "/eval_report.csv", run.report);

  auto params = joint_res.model.extractor.params();
  for (auto& p : joint_res.model.image_head.params()) params.push_back(p);
  for (auto& p : joint_res.model.discriminator.params()) params.push_back(p);
  for (auto& p : run.net->params()) params.push_back(p);
  io::write_model_snapshot(cfg.out + "/model.eegm", params);

  return {run.report.accuracy, run.report};
}

struct ReduceRow {
  double fraction;  // as a percentage
  double joint;
  double no_joint;
};

/// Shrinking-training-set experiment: same test set, nested training
/// subsets, with and without joint training.
inline std::vector<ReduceRow> cmd_reduce_experiment(const PipelineConfig& cfg) {
  cfg.validate();
  const auto rows = detail::read_manifest(cfg.out + "/manifest.csv");
  if (rows.empty()) throw ValidationError("manifest is empty; run `convert` first");
  const auto images = detail::prepare_proxy_images(cfg);
  std::size_t classes = 0;
  for (const auto& r : rows) classes = std::max(classes, static_cast<std::size_t>(r.label) + 1);

  const auto split = detail::split_by_source(rows, cfg.test_fraction, cfg.seed);

  // One shuffle of the training sources; fractions take nested prefixes.
  std::vector<std::size_t> shuffled = split.train_sources;
  Rng rng = Rng(cfg.seed).fork(44);
  rng.shuffle(shuffled);

  // The no-joint extractor never sees flow data, so it is shared by all
  // fractions.
  auto nojoint_res = joint::train_image_only(images, detail::joint_config(cfg));
  std::vector<std::size_t> all_rows = split.train_rows;
  all_rows.insert(all_rows.end(), split.test_rows.begin(), split.test_rows.end());
  const auto nojoint_features =
      detail::compute_features(cfg, rows, all_rows, nojoint_res.model.extractor);

  std::vector<ReduceRow> table;
  for (double frac : cfg.fractions) {
    const std::size_t keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(frac * static_cast<double>(shuffled.size()))));
    std::set<std::size_t> keep_sources(shuffled.begin(),
                                       shuffled.begin() + static_cast<std::ptrdiff_t>(keep));
    std::vector<std::size_t> train_rows;
    for (std::size_t i : split.train_rows)
      if (keep_sources.count(rows[i].source)) train_rows.push_back(i);

    const auto pool = detail::build_flow_pool(cfg, rows, train_rows);
    auto joint_res = joint::joint_train(images, pool, detail::joint_config(cfg));
    std::vector<std::size_t> wanted = train_rows;
    wanted.insert(wanted.end(), split.test_rows.begin(), split.test_rows.end());
    const auto joint_features =
        detail::compute_features(cfg, rows, wanted, joint_res.model.extractor);

    const auto joint_run = detail::run_classifier(
        cfg, classes, joint_res.model.extractor.feature_dim(), joint_features, train_rows,
        split.test_rows);
    const auto nojoint_run = detail::run_classifier(
        cfg, classes, nojoint_res.model.extractor.feature_dim(), nojoint_features, train_rows,
        split.test_rows);

    table.push_back({frac * 100.0, joint_run.report.accuracy, nojoint_run.report.accuracy});
  }

  std::ofstream out(cfg.out + "/reduce_experiment.csv");
  if (!out) throw IoError("cannot write " + cfg.out + "/reduce_experiment.csv");
  out << "fraction,joint,no_joint\n";
  for (const auto& r : table)
    out << detail::fmt(r.fraction) << "," << detail::fmt(r.joint) << ","
        << detail::fmt(r.no_joint) << "\n";
  return table;
}

/// Writes the 13 PGM frames and 12 HSV flow PPMs per band for one epoch,
/// plus a confusion-matrix heatmap when an evaluation report exists.
inline void cmd_visualize(const PipelineConfig& cfg, std::size_t epoch_id) {
  cfg.validate();
  const auto rows = detail::read_manifest(cfg.out + "/manifest.csv");
  const auto row_it =
      std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.id == epoch_id; });
  if (row_it == rows.end())
    throw ValidationError("epoch id " + std::to_string(epoch_id) + " is not in the manifest");

  const auto inputs = detail::prepare_inputs(cfg, /*write_copies=*/false);
  const auto ex = detail::extract_all(cfg, inputs);
  if (epoch_id >= ex.epochs.size())
    throw ValidationError("epoch id " + std::to_string(epoch_id) + " out of range");

  const std::string dir = cfg.out + "/viz_" + std::to_string(epoch_id);
  fs::create_directories(dir);

  const detail::Renderer renderer(inputs.montage, cfg.grid);
  const auto stacked = bands::rhythm_stack(ex.epochs[epoch_id].epoch.data, inputs.rec.rate);
  const auto video = topo::render_video(stacked, renderer.interp, renderer.sampler, cfg.frames,
                                        cfg.frame_power);

  char name[64];
  for (std::size_t b = 0; b < video.frames.size(); ++b) {
    // Min-max normalization is shared by the whole band video, so frames
    // stay comparable over time.
    double lo = video.frames[b][0].min(), hi = video.frames[b][0].max();
    for (const auto& f : video.frames[b]) {
      lo = std::min(lo, f.min());
      hi = std::max(hi, f.max());
    }
    for (std::size_t t = 0; t < video.frames[b].size(); ++t) {
      std::snprintf(name, sizeof(name), "/frame_%s_%02zu.pgm", stacked.bands[b].name.c_str(), t);
      io::write_pgm(dir + name, cfg.grid, cfg.grid, io::to_u8(video.frames[b][t], lo, hi));
    }
  }

  const auto fv = io::read_flow_container(detail::container_path(cfg.out, epoch_id));
  for (std::size_t b = 0; b < fv.band_count(); ++b)
    for (std::size_t p = 0; p < fv.pair_count(); ++p) {
      std::snprintf(name, sizeof(name), "/flow_%s_%02zu.ppm", stacked.bands[b].name.c_str(), p);
      io::write_ppm(dir + name, flow::flow_to_hsv(fv.fields[b][p]));
    }

  if (const auto rep = detail::read_eval_report(cfg.out + "/eval_report.csv")) {
    const std::size_t k = rep->confusion.size();
    const std::size_t cell = 16;
    std::size_t peak = 1;
    for (const auto& r : rep->confusion)
      for (std::size_t v : r) peak = std::max(peak, v);
    io::RgbImage img(k * cell, k * cell);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        const double heat = static_cast<double>(rep->confusion[i][j]) / static_cast<double>(peak);
        const auto r8 = static_cast<std::uint8_t>(std::nearbyint(255.0 * heat));
        const auto b8 = static_cast<std::uint8_t>(std::nearbyint(255.0 * (1.0 - heat)));
        for (std::size_t y = 0; y < cell; ++y)
          for (std::size_t x = 0; x < cell; ++x) {
            img.at(i * cell + y, j * cell + x, 0) = r8;
            img.at(i * cell + y, j * cell + x, 2) = b8;
          }
      }
    io::write_ppm(dir + "/confusion.ppm", img);
  }
}

}  // namespace eegflow::pipeline
