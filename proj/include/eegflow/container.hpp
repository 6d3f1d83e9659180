#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "eegflow/core.hpp"
#include "eegflow/nn.hpp"
#include "eegflow/optflow.hpp"

namespace eegflow::io {

namespace detail {

template <class T>
void write_le(std::ofstream& out, T v) {
  // Little-endian on-disk layout; this code targets little-endian hosts.
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_le(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (in.gcount() != sizeof(T)) throw IoError(path + ": truncated");
  return v;
}

}  // namespace detail

constexpr std::uint16_t kFlowVersion = 1;
constexpr std::uint16_t kModelVersion = 1;

/// Flow container: magic "EEGF", version u16, dims (bands, pairs, h, w)
/// as u16, f32 dx/dy planes in band-major order, then the epoch's
/// min/max f32 pair.
inline void write_flow_container(const std::string& path, const flow::FlowVideo& v) {
  if (v.fields.empty() || v.fields[0].empty())
    throw ValidationError("flow container needs at least one field");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write("EEGF", 4);
  detail::write_le<std::uint16_t>(out, kFlowVersion);
  const auto& first = v.fields[0][0];
  detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(v.band_count()));
  detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(v.pair_count()));
  detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(first.dx.rows()));
  detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(first.dx.cols()));
  for (const auto& band : v.fields)
    for (const auto& f : band)
      for (const Matrix* m : {&f.dx, &f.dy})
        for (double x : m->raw()) detail::write_le<float>(out, static_cast<float>(x));
  detail::write_le<float>(out, static_cast<float>(v.u8_min));
  detail::write_le<float>(out, static_cast<float>(v.u8_max));
  if (!out) throw IoError("short write to " + path);
}

inline flow::FlowVideo read_flow_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "EEGF", 4) != 0)
    throw IoError(path + ": not a flow container");
  const auto version = detail::read_le<std::uint16_t>(in, path);
  if (version != kFlowVersion)
    throw IoError(path + ": unsupported version " + std::to_string(version));
  const auto bands = detail::read_le<std::uint16_t>(in, path);
  const auto pairs = detail::read_le<std::uint16_t>(in, path);
  const auto h = detail::read_le<std::uint16_t>(in, path);
  const auto w = detail::read_le<std::uint16_t>(in, path);
  if (bands == 0 || pairs == 0 || h == 0 || w == 0) throw IoError(path + ": empty dimensions");

  flow::FlowVideo v;
  v.fields.resize(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    for (std::size_t p = 0; p < pairs; ++p) {
      flow::FlowField f{Matrix(h, w), Matrix(h, w)};
      for (Matrix* m : {&f.dx, &f.dy})
        for (double& x : m->raw()) x = detail::read_le<float>(in, path);
      v.fields[b].push_back(std::move(f));
    }
  }
  v.u8_min = detail::read_le<float>(in, path);
  v.u8_max = detail::read_le<float>(in, path);
  return v;
}

/// Model snapshot: magic "EEGM", version u16, tensor count u32, then per
/// tensor a name (u16 length + bytes), rank u8, u16 dims and f32 data.
inline void write_model_snapshot(const std::string& path,
                                 const std::vector<nn::ParamRef>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write("EEGM", 4);
  detail::write_le<std::uint16_t>(out, kModelVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(p.dims.size()));
    std::size_t expect = 1;
    for (std::size_t d : p.dims) {
      detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(d));
      expect *= d;
    }
    if (expect != p.value->size())
      throw ValidationError("tensor " + p.name + " dims do not match data");
    for (double x : *p.value) detail::write_le<float>(out, static_cast<float>(x));
  }
  if (!out) throw IoError("short write to " + path);
}

struct SnapshotTensor {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<double> data;
};

inline std::vector<SnapshotTensor> read_model_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "EEGM", 4) != 0)
    throw IoError(path + ": not a model snapshot");
  const auto version = detail::read_le<std::uint16_t>(in, path);
  if (version != kModelVersion)
    throw IoError(path + ": unsupported version " + std::to_string(version));
  const auto count = detail::read_le<std::uint32_t>(in, path);
  std::vector<SnapshotTensor> out;
  out.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    SnapshotTensor st;
    const auto nlen = detail::read_le<std::uint16_t>(in, path);
    st.name.resize(nlen);
    in.read(st.name.data(), nlen);
    if (in.gcount() != nlen) throw IoError(path + ": truncated tensor name");
    const auto rank = detail::read_le<std::uint8_t>(in, path);
    std::size_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      st.dims.push_back(detail::read_le<std::uint16_t>(in, path));
      n *= st.dims.back();
    }
    st.data.resize(n);
    for (double& x : st.data) x = detail::read_le<float>(in, path);
    out.push_back(std::move(st));
  }
  return out;
}

/// Restores parameters by name; every referenced parameter must be present
/// with matching size.
inline void load_params(const std::vector<SnapshotTensor>& tensors,
                        std::vector<nn::ParamRef>& params) {
  for (auto& p : params) {
    bool found = false;
    for (const auto& t : tensors) {
      if (t.name != p.name) continue;
      if (t.data.size() != p.value->size())
        throw ValidationError("snapshot tensor " + t.name + " size mismatch");
      *p.value = t.data;
      found = true;
      break;
    }
    if (!found) throw ValidationError("snapshot missing tensor " + p.name);
  }
}

}  // namespace eegflow::io
