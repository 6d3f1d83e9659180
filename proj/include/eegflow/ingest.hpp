#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eegflow/core.hpp"

namespace eegflow::ingest {

struct Electrode {
  std::string name;
  double x, y, z;  // unit sphere
};

/// Electrode cap geometry. Positions live on the unit sphere.
struct Montage {
  std::vector<Electrode> electrodes;

  std::size_t size() const { return electrodes.size(); }

  void validate() const {
    if (electrodes.size() < 4)
      throw ValidationError("montage needs at least 4 electrodes, got " +
                            std::to_string(electrodes.size()));
    std::set<std::string> names;
    for (const auto& e : electrodes) {
      const double n = std::sqrt(e.x * e.x + e.y * e.y + e.z * e.z);
      if (std::abs(n - 1.0) > 1e-6)
        throw ValidationError("electrode '" + e.name + "' is not on the unit sphere (|p|=" +
                              std::to_string(n) + ")");
      if (!names.insert(e.name).second)
        throw ValidationError("duplicate electrode name '" + e.name + "'");
    }
  }
};

/// Continuous multichannel recording plus its per-sample event channel.
struct RawRecording {
  Matrix data;                // channels x samples, microvolts
  double rate = 0.0;          // samples per second
  std::vector<int> stim;      // event code per sample, 0 = none
  std::string montage_ref;

  std::size_t channels() const { return data.rows(); }
  std::size_t samples() const { return data.cols(); }
};

/// One stimulus-locked window.
struct Epoch {
  Matrix data;           // channels x L
  int label = 0;         // class id in [0, K)
  std::int64_t onset_sample = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("cannot parse number '" + s + "' in " + context);
  }
}

}  // namespace detail

/// Reads a montage CSV of `name,x,y,z` rows.
inline Montage load_montage(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open montage file: " + path);
  Montage m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 4)
      throw IoError(path + ":" + std::to_string(lineno) + ": expected name,x,y,z");
    Electrode e;
    e.name = cells[0];
    e.x = detail::parse_double(cells[1], path);
    e.y = detail::parse_double(cells[2], path);
    e.z = detail::parse_double(cells[3], path);
    m.electrodes.push_back(e);
  }
  m.validate();
  return m;
}

/// Reads a recording CSV (`time,<ch...>,stim` header, one row per sample)
/// and validates it against the montage. Channel columns must match the
/// montage electrode count; when the header names match the montage names
/// as a set, columns are reordered to montage order.
inline RawRecording load_recording(const std::string& path, const Montage& montage) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open recording file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty recording file: " + path);

  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header.front() != "time" || header.back() != "stim")
    throw IoError(path + ": header must be time,<channels...>,stim");
  const std::size_t nch = header.size() - 2;
  if (nch != montage.size())
    throw ValidationError(path + ": channel count " + std::to_string(nch) +
                          " does not match montage electrode count " +
                          std::to_string(montage.size()));

  // Column -> montage-row mapping. Positional unless the names form the
  // same set as the montage, in which case match by name.
  std::vector<std::size_t> col_to_row(nch);
  {
    std::map<std::string, std::size_t> montage_index;
    for (std::size_t i = 0; i < montage.size(); ++i)
      montage_index[montage.electrodes[i].name] = i;
    bool all_named = true;
    std::set<std::string> seen;
    for (std::size_t c = 0; c < nch; ++c) {
      const std::string& name = header[c + 1];
      if (!montage_index.count(name) || !seen.insert(name).second) {
        all_named = false;
        break;
      }
    }
    for (std::size_t c = 0; c < nch; ++c)
      col_to_row[c] = all_named ? montage_index[header[c + 1]] : c;
  }

  std::vector<double> times;
  std::vector<std::vector<double>> rows;  // per sample: nch values
  std::vector<int> stim;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(header.size()) + " columns, got " +
                    std::to_string(cells.size()));
    const std::string ctx = path + ":" + std::to_string(lineno);
    times.push_back(detail::parse_double(cells[0], ctx));
    std::vector<double> sample(nch);
    for (std::size_t c = 0; c < nch; ++c) {
      const double v = detail::parse_double(cells[c + 1], ctx);
      if (!std::isfinite(v))
        throw ValidationError(ctx + ": non-finite sample in channel '" + header[c + 1] + "'");
      sample[c] = v;
    }
    const double sv = detail::parse_double(cells.back(), ctx);
    if (!std::isfinite(sv) || sv != std::floor(sv))
      throw ValidationError(ctx + ": stim code must be an integer");
    stim.push_back(static_cast<int>(sv));
    rows.push_back(std::move(sample));
  }
  if (rows.size() < 2) throw IoError(path + ": need at least 2 samples");

  RawRecording rec;
  rec.rate = (static_cast<double>(times.size()) - 1.0) / (times.back() - times.front());
  if (!(rec.rate > 0.0) || !std::isfinite(rec.rate))
    throw ValidationError(path + ": time column does not define a positive rate");
  rec.data = Matrix(nch, rows.size());
  for (std::size_t s = 0; s < rows.size(); ++s)
    for (std::size_t c = 0; c < nch; ++c)
      rec.data(col_to_row[c], s) = rows[s][c];
  rec.stim = std::move(stim);
  return rec;
}

struct ExtractResult {
  std::vector<Epoch> epochs;
  std::size_t dropped = 0;                 // events whose window overran
  std::vector<std::int64_t> drop_onsets;   // itemized for the manifest
};

/// Cuts one window of `window` samples per mapped stim event, starting at
/// the event sample. Events whose window overruns the recording are dropped
/// and counted, never zero-padded. Codes absent from `event_map` must be
/// listed in `ignore_codes`.
inline ExtractResult extract_epochs(const RawRecording& rec, std::size_t window,
                                    const std::map<int, int>& event_map,
                                    const std::set<int>& ignore_codes = {}) {
  if (window < 2) throw ValidationError("epoch window must be at least 2 samples");
  ExtractResult out;
  for (std::size_t s = 0; s < rec.stim.size(); ++s) {
    const int code = rec.stim[s];
    if (code == 0) continue;
    const auto it = event_map.find(code);
    if (it == event_map.end()) {
      if (ignore_codes.count(code)) continue;
      throw ValidationError("stim code " + std::to_string(code) +
                            " is neither mapped nor ignored");
    }
    if (s + window > rec.samples()) {
      ++out.dropped;
      out.drop_onsets.push_back(static_cast<std::int64_t>(s));
      continue;
    }
    Epoch e;
    e.label = it->second;
    e.onset_sample = static_cast<std::int64_t>(s);
    e.data = Matrix(rec.channels(), window);
    for (std::size_t c = 0; c < rec.channels(); ++c)
      for (std::size_t t = 0; t < window; ++t)
        e.data(c, t) = rec.data(c, s + t);
    out.epochs.push_back(std::move(e));
  }
  return out;
}

/// One resampled epoch remembers which jitter offset produced it.
struct ResampledEpoch {
  Epoch epoch;
  std::size_t source_index = 0;
  std::int64_t offset = 0;  // in [-J, +J]
};

/// Data augmentation by temporal jitter. Sources must be pre-padded to
/// L + 2J samples; each derived epoch is the length-L window at a uniform
/// integer offset in [-J, +J] around the nominal onset. Deterministic per
/// seed; labels are preserved.
inline std::vector<ResampledEpoch> resample_epochs(const std::vector<Epoch>& padded,
                                                   std::size_t target_len, std::size_t count,
                                                   std::size_t jitter, std::uint64_t seed) {
  if (count < 1) throw ValidationError("resample count must be >= 1");
  std::vector<ResampledEpoch> out;
  out.reserve(padded.size() * count);
  Rng rng = Rng(seed).fork(0x7265736D70ull);  // resample stream
  for (std::size_t i = 0; i < padded.size(); ++i) {
    const Epoch& src = padded[i];
    if (src.data.cols() != target_len + 2 * jitter)
      throw ValidationError("padded epoch " + std::to_string(i) + " has " +
                            std::to_string(src.data.cols()) + " samples, expected L+2J = " +
                            std::to_string(target_len + 2 * jitter));
    for (std::size_t k = 0; k < count; ++k) {
      const std::int64_t off =
          jitter == 0 ? 0
                      : rng.uniform_int(-static_cast<std::int64_t>(jitter),
                                        static_cast<std::int64_t>(jitter));
      ResampledEpoch r;
      r.source_index = i;
      r.offset = off;
      r.epoch.label = src.label;
      r.epoch.onset_sample = src.onset_sample + off;
      r.epoch.data = Matrix(src.data.rows(), target_len);
      const auto start = static_cast<std::size_t>(static_cast<std::int64_t>(jitter) + off);
      for (std::size_t c = 0; c < src.data.rows(); ++c)
        for (std::size_t t = 0; t < target_len; ++t)
          r.epoch.data(c, t) = src.data(c, start + t);
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace eegflow::ingest
