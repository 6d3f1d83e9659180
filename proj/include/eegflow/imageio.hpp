#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "eegflow/core.hpp"

namespace eegflow::io {

/// Interleaved 8-bit RGB image.
struct RgbImage {
  std::size_t rows = 0, cols = 0;
  std::vector<std::uint8_t> data;  // rows * cols * 3

  RgbImage() = default;
  RgbImage(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c * 3, 0) {}

  std::uint8_t& at(std::size_t r, std::size_t c, std::size_t ch) {
    return data[(r * cols + c) * 3 + ch];
  }
  std::uint8_t at(std::size_t r, std::size_t c, std::size_t ch) const {
    return data[(r * cols + c) * 3 + ch];
  }
};

/// Affine [lo, hi] -> [0, 255] quantization; lo == hi maps everything to 0.
inline std::vector<std::uint8_t> to_u8(const Matrix& m, double lo, double hi) {
  std::vector<std::uint8_t> out(m.size());
  const double span = hi - lo;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (span <= 0.0) {
      out[i] = 0;
      continue;
    }
    double v = (m.raw()[i] - lo) / span * 255.0;
    v = std::min(255.0, std::max(0.0, v));
    out[i] = static_cast<std::uint8_t>(std::nearbyint(v));
  }
  return out;
}

inline void write_pgm(const std::string& path, std::size_t rows, std::size_t cols,
                      const std::vector<std::uint8_t>& gray) {
  if (gray.size() != rows * cols) throw ValidationError("pgm buffer size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P5\n" << cols << " " << rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
  if (!out) throw IoError("short write to " + path);
}

inline void write_ppm(const std::string& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P6\n" << img.cols << " " << img.rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw IoError("short write to " + path);
}

namespace detail {
inline int next_pnm_int(std::istream& in) {
  int c = in.get();
  while (c == '#' || std::isspace(c)) {
    if (c == '#')
      while (c != '\n' && c != EOF) c = in.get();
    c = in.get();
  }
  int value = 0;
  bool any = false;
  while (c >= '0' && c <= '9') {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw IoError("malformed PNM header");
  return value;
}
}  // namespace detail

inline RgbImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '6') throw IoError(path + ": not a binary PPM");
  const int cols = detail::next_pnm_int(in);
  const int rows = detail::next_pnm_int(in);
  const int maxval = detail::next_pnm_int(in);
  if (maxval != 255) throw IoError(path + ": only maxval 255 supported");
  RgbImage img(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    throw IoError(path + ": truncated pixel data");
  return img;
}

}  // namespace eegflow::io
