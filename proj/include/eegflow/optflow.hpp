#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "eegflow/core.hpp"
#include "eegflow/imageio.hpp"
#include "eegflow/topomap.hpp"

namespace eegflow::flow {

/// Dense displacement between two frames, pixels per frame step.
/// x = column axis, y = row axis.
struct FlowField {
  Matrix dx, dy;
};

struct FlowParams {
  double sigma = 1.1;     // applicability std-dev of the expansion window
  int radius = 3;         // expansion window radius
  int smooth_radius = 5;  // averaging radius for the displacement solve
  int iterations = 3;
};

/// Per-pixel quadratic model f(p + d) ~ c + b.d + d'Ad fitted over a
/// Gaussian-weighted window.
struct PolyExpansion {
  Matrix a11, a12, a22;  // A symmetric
  Matrix b1, b2;
  Matrix c;
};

namespace detail {

inline std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto sn = static_cast<std::ptrdiff_t>(n);
  if (i < 0) i = -i;
  if (i >= sn) i = 2 * (sn - 1) - i;
  return static_cast<std::size_t>(i);
}

inline void solve6(std::array<std::array<double, 6>, 6> m, std::array<double, 6>& rhs) {
  for (int col = 0; col < 6; ++col) {
    int piv = col;
    for (int r = col + 1; r < 6; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    std::swap(m[col], m[piv]);
    std::swap(rhs[col], rhs[piv]);
    if (std::abs(m[col][col]) < 1e-300) throw NumericError("singular expansion system");
    for (int r = 0; r < 6; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c2 = col; c2 < 6; ++c2) m[r][c2] -= f * m[col][c2];
      rhs[r] -= f * rhs[col];
    }
  }
  for (int i = 0; i < 6; ++i) rhs[i] /= m[i][i];
}

/// Separable Gaussian smoothing with reflected borders.
inline Matrix gauss_smooth(const Matrix& m, int radius, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * sqr(static_cast<double>(i) / sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;

  const std::size_t rows = m.rows(), cols = m.cols();
  Matrix tmp(rows, cols), out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<std::size_t>(i + radius)] *
               m(r, reflect(static_cast<std::ptrdiff_t>(c) + i, cols));
      tmp(r, c) = acc;
    }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<std::size_t>(i + radius)] *
               tmp(reflect(static_cast<std::ptrdiff_t>(r) + i, rows), c);
      out(r, c) = acc;
    }
  return out;
}

}  // namespace detail

/// Weighted least-squares quadratic expansion of one frame. The normal
/// matrix depends only on the window geometry, so it is inverted once;
/// border pixels read reflected samples.
inline PolyExpansion poly_expansion(const Matrix& frame, double sigma, int radius) {
  if (radius < 1) throw ValidationError("expansion radius must be >= 1");
  const std::size_t rows = frame.rows(), cols = frame.cols();

  const int size = 2 * radius + 1;
  std::vector<double> w(static_cast<std::size_t>(size * size));
  std::vector<std::array<double, 6>> phi(static_cast<std::size_t>(size * size));
  {
    std::size_t idx = 0;
    double wsum = 0.0;
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx, ++idx) {
        const double x = dx, y = dy;
        w[idx] = std::exp(-0.5 * (x * x + y * y) / (sigma * sigma));
        wsum += w[idx];
        phi[idx] = {1.0, x, y, x * x, y * y, x * y};
      }
    for (double& wi : w) wi /= wsum;
  }

  // G = sum w phi phi', shared by all pixels.
  std::array<std::array<double, 6>, 6> g{};
  for (std::size_t idx = 0; idx < w.size(); ++idx)
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) g[i][j] += w[idx] * phi[idx][i] * phi[idx][j];

  // Invert by solving against the identity columns.
  std::array<std::array<double, 6>, 6> ginv{};
  for (int col = 0; col < 6; ++col) {
    std::array<double, 6> e{};
    e[col] = 1.0;
    auto gm = g;
    detail::solve6(gm, e);
    for (int r = 0; r < 6; ++r) ginv[r][col] = e[r];
  }

  PolyExpansion out{Matrix(rows, cols), Matrix(rows, cols), Matrix(rows, cols),
                    Matrix(rows, cols), Matrix(rows, cols), Matrix(rows, cols)};
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      std::array<double, 6> v{};
      std::size_t idx = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const std::size_t rr = detail::reflect(static_cast<std::ptrdiff_t>(r) + dy, rows);
        for (int dx = -radius; dx <= radius; ++dx, ++idx) {
          const std::size_t cc = detail::reflect(static_cast<std::ptrdiff_t>(c) + dx, cols);
          const double wf = w[idx] * frame(rr, cc);
          for (int i = 0; i < 6; ++i) v[i] += wf * phi[idx][i];
        }
      }
      std::array<double, 6> coef{};
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) coef[i] += ginv[i][j] * v[j];
      out.c(r, c) = coef[0];
      out.b1(r, c) = coef[1];
      out.b2(r, c) = coef[2];
      out.a11(r, c) = coef[3];
      out.a22(r, c) = coef[4];
      out.a12(r, c) = 0.5 * coef[5];  // cross term xy = 2*a12*x*y in d'Ad
    }
  return out;
}

/// Two-frame displacement estimate from the polynomial expansions, refined
/// by warping the second frame's expansion with the rounded current
/// estimate. Near-singular neighborhoods relax to zero flow through a
/// trace-scaled Tikhonov term, which keeps the solve invariant to a common
/// brightness rescale of both frames.
inline FlowField flow_two_frame(const Matrix& f1, const Matrix& f2, const FlowParams& p = {}) {
  if (f1.rows() != f2.rows() || f1.cols() != f2.cols())
    throw ValidationError("flow frames must share a shape");
  if (p.radius < 1 || p.smooth_radius < 1 || p.iterations < 1 || !(p.sigma > 0.0))
    throw ValidationError("flow parameters must be positive");
  const std::size_t rows = f1.rows(), cols = f1.cols();

  const PolyExpansion e1 = poly_expansion(f1, p.sigma, p.radius);
  const PolyExpansion e2 = poly_expansion(f2, p.sigma, p.radius);

  Matrix dx(rows, cols, 0.0), dy(rows, cols, 0.0);
  const double rmax = static_cast<double>(p.smooth_radius);

  for (int iter = 0; iter < p.iterations; ++iter) {
    Matrix g11(rows, cols), g12(rows, cols), g22(rows, cols), h1(rows, cols), h2(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const double sx = std::nearbyint(dx(r, c));
        const double sy = std::nearbyint(dy(r, c));
        const auto cc = static_cast<std::size_t>(std::clamp(
            static_cast<double>(c) + sx, 0.0, static_cast<double>(cols - 1)));
        const auto rr = static_cast<std::size_t>(std::clamp(
            static_cast<double>(r) + sy, 0.0, static_cast<double>(rows - 1)));
        const double ex = static_cast<double>(cc) - static_cast<double>(c);
        const double ey = static_cast<double>(rr) - static_cast<double>(r);

        const double a11 = 0.5 * (e1.a11(r, c) + e2.a11(rr, cc));
        const double a12 = 0.5 * (e1.a12(r, c) + e2.a12(rr, cc));
        const double a22 = 0.5 * (e1.a22(r, c) + e2.a22(rr, cc));
        const double db1 = -0.5 * (e2.b1(rr, cc) - e1.b1(r, c)) + a11 * ex + a12 * ey;
        const double db2 = -0.5 * (e2.b2(rr, cc) - e1.b2(r, c)) + a12 * ex + a22 * ey;

        // Normal equations A'A d = A'db; A symmetric.
        g11(r, c) = a11 * a11 + a12 * a12;
        g12(r, c) = a12 * (a11 + a22);
        g22(r, c) = a12 * a12 + a22 * a22;
        h1(r, c) = a11 * db1 + a12 * db2;
        h2(r, c) = a12 * db1 + a22 * db2;
      }

    const double ssigma = std::max(1.0, rmax / 2.0);
    g11 = detail::gauss_smooth(g11, p.smooth_radius, ssigma);
    g12 = detail::gauss_smooth(g12, p.smooth_radius, ssigma);
    g22 = detail::gauss_smooth(g22, p.smooth_radius, ssigma);
    h1 = detail::gauss_smooth(h1, p.smooth_radius, ssigma);
    h2 = detail::gauss_smooth(h2, p.smooth_radius, ssigma);

    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const double tr = g11(r, c) + g22(r, c);
        if (!(tr > 1e-12)) {
          dx(r, c) = 0.0;
          dy(r, c) = 0.0;
          continue;
        }
        const double eps = 1e-6 * 0.5 * tr;
        const double m11 = g11(r, c) + eps, m22 = g22(r, c) + eps, m12 = g12(r, c);
        const double det = m11 * m22 - m12 * m12;
        double ux = (m22 * h1(r, c) - m12 * h2(r, c)) / det;
        double uy = (m11 * h2(r, c) - m12 * h1(r, c)) / det;
        const double mag = std::sqrt(ux * ux + uy * uy);
        if (mag > rmax) {
          ux *= rmax / mag;
          uy *= rmax / mag;
        }
        dx(r, c) = ux;
        dy(r, c) = uy;
      }
  }

  if (!dx.all_finite() || !dy.all_finite()) throw NumericError("non-finite flow estimate");
  return {std::move(dx), std::move(dy)};
}

/// Direction-and-magnitude rendering: hue = flow angle, value = magnitude
/// over the field's own max, full saturation.
inline io::RgbImage flow_to_hsv(const FlowField& f) {
  const std::size_t rows = f.dx.rows(), cols = f.dx.cols();
  double maxmag = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      maxmag = std::max(maxmag, std::hypot(f.dx(r, c), f.dy(r, c)));

  io::RgbImage img(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = f.dx(r, c), y = f.dy(r, c);
      double hue = std::atan2(y, x) * 180.0 / M_PI;
      if (hue < 0.0) hue += 360.0;
      const double val = maxmag > 0.0 ? std::hypot(x, y) / maxmag : 0.0;

      const double hp = hue / 60.0;
      const int sector = static_cast<int>(hp) % 6;
      const double frac = hp - std::floor(hp);
      const double q = val * (1.0 - frac);
      const double t = val * frac;
      double rgb[3] = {0.0, 0.0, 0.0};
      switch (sector) {
        case 0: rgb[0] = val; rgb[1] = t; break;
        case 1: rgb[0] = q; rgb[1] = val; break;
        case 2: rgb[1] = val; rgb[2] = t; break;
        case 3: rgb[1] = q; rgb[2] = val; break;
        case 4: rgb[0] = t; rgb[2] = val; break;
        default: rgb[0] = val; rgb[2] = q; break;
      }
      for (int ch = 0; ch < 3; ++ch)
        img.at(r, c, static_cast<std::size_t>(ch)) =
            static_cast<std::uint8_t>(std::nearbyint(255.0 * rgb[ch]));
    }
  return img;
}

/// All flow fields of one epoch plus the [0,255] storage encoding and the
/// HSV renderings.
struct FlowVideo {
  std::vector<std::vector<FlowField>> fields;  // [band][pair]
  std::vector<std::uint8_t> u8;                // dx,dy planes, band-major
  double u8_min = 0.0, u8_max = 0.0;           // metadata for inversion
  std::vector<std::vector<io::RgbImage>> hsv;  // [band][pair]

  std::size_t band_count() const { return fields.size(); }
  std::size_t pair_count() const { return fields.empty() ? 0 : fields[0].size(); }
};

/// Epoch-global affine encoding of every flow value to [0, 255], rounded
/// half to even. The (min, max) pair makes the map invertible to within
/// (max - min) / 255.
inline void rescale_u8(FlowVideo& v) {
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& band : v.fields)
    for (const auto& f : band) {
      if (!f.dx.all_finite() || !f.dy.all_finite())
        throw NumericError("non-finite flow in rescale");
      for (const Matrix* m : {&f.dx, &f.dy}) {
        const double mn = m->min(), mx = m->max();
        lo = first ? mn : std::min(lo, mn);
        hi = first ? mx : std::max(hi, mx);
        first = false;
      }
    }
  if (first) throw ValidationError("rescale of empty flow video");
  v.u8_min = lo;
  v.u8_max = hi;
  v.u8.clear();
  const double span = hi - lo;
  for (const auto& band : v.fields)
    for (const auto& f : band)
      for (const Matrix* m : {&f.dx, &f.dy})
        for (double x : m->raw()) {
          const double scaled = span > 0.0 ? (x - lo) / span * 255.0 : 0.0;
          v.u8.push_back(static_cast<std::uint8_t>(std::nearbyint(scaled)));
        }
}

/// Farneback flow over every consecutive frame pair of every band.
inline FlowVideo video_to_flow(const topo::EegVideo& video, const FlowParams& p = {}) {
  if (video.frame_count() < 2) throw ValidationError("flow needs at least 2 frames");
  FlowVideo out;
  out.fields.resize(video.frames.size());
  out.hsv.resize(video.frames.size());
  for (std::size_t b = 0; b < video.frames.size(); ++b) {
    const auto& frames = video.frames[b];
    for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
      out.fields[b].push_back(flow_two_frame(frames[t], frames[t + 1], p));
      out.hsv[b].push_back(flow_to_hsv(out.fields[b].back()));
    }
  }
  rescale_u8(out);
  return out;
}

}  // namespace eegflow::flow
