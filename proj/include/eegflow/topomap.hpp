#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "eegflow/bandfilter.hpp"
#include "eegflow/core.hpp"
#include "eegflow/ingest.hpp"

namespace eegflow::topo {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;

/// Electrode positions flattened to the plane. Planar distance from the
/// origin equals the great-circle angle to the projection center.
struct ProjectedMontage {
  std::vector<Vec2> points;
  Vec3 center{};
};

inline double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline Vec3 cross3(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline Vec3 normalized3(const Vec3& a) {
  const double n = std::sqrt(dot3(a, a));
  return {a[0] / n, a[1] / n, a[2] / n};
}

/// Direction of the topmost electrode, the conventional center of an EEG map.
inline Vec3 vertex_center(const ingest::Montage& m) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < m.size(); ++i)
    if (m.electrodes[i].z > m.electrodes[best].z) best = i;
  const auto& e = m.electrodes[best];
  return normalized3({e.x, e.y, e.z});
}

/// Azimuthal equidistant projection about `center`: each electrode maps to
/// (rho cos theta, rho sin theta) where rho is the geodesic angle to the
/// center and theta its azimuth in a fixed tangent basis.
inline ProjectedMontage aep_project(const ingest::Montage& montage, const Vec3& center) {
  const Vec3 c = normalized3(center);

  // Tangent basis: project the global axis least aligned with the center.
  Vec3 ref = std::abs(c[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  Vec3 t1{ref[0] - dot3(ref, c) * c[0], ref[1] - dot3(ref, c) * c[1], ref[2] - dot3(ref, c) * c[2]};
  t1 = normalized3(t1);
  const Vec3 t2 = cross3(c, t1);

  ProjectedMontage out;
  out.center = c;
  out.points.reserve(montage.size());
  for (const auto& e : montage.electrodes) {
    const Vec3 p{e.x, e.y, e.z};
    const double d = std::clamp(dot3(p, c), -1.0, 1.0);
    const double rho = std::acos(d);
    if (rho > M_PI - 1e-9)
      throw ValidationError("electrode '" + e.name + "' is antipodal to the projection center");
    if (rho < 1e-12) {
      out.points.push_back({0.0, 0.0});
      continue;
    }
    const double theta = std::atan2(dot3(p, t2), dot3(p, t1));
    out.points.push_back({rho * std::cos(theta), rho * std::sin(theta)});
  }
  return out;
}

struct Triangle {
  std::array<std::size_t, 3> v;
};

struct Triangulation {
  std::vector<Vec2> points;
  std::vector<Triangle> triangles;
};

namespace detail {

inline double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

/// > 0 when p lies strictly inside the circumcircle of ccw triangle (a,b,c).
/// `scale` receives the magnitude of the determinant's terms, the yardstick
/// for calling a result a numerical tie.
inline double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p,
                       double* scale = nullptr) {
  const double adx = a[0] - p[0], ady = a[1] - p[1];
  const double bdx = b[0] - p[0], bdy = b[1] - p[1];
  const double cdx = c[0] - p[0], cdy = c[1] - p[1];
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  if (scale)
    *scale = std::abs(adx) * (std::abs(bdy) * cd + bd * std::abs(cdy)) +
             std::abs(ady) * (std::abs(bdx) * cd + bd * std::abs(cdx)) +
             ad * (std::abs(bdx) * std::abs(cdy) + std::abs(bdy) * std::abs(cdx));
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

}  // namespace detail

/// Bowyer-Watson Delaunay triangulation. Cocircular ties are left as they
/// fall, which keeps the empty-circumcircle property up to tolerance.
inline Triangulation triangulate(const std::vector<Vec2>& pts) {
  if (pts.size() < 3) throw ValidationError("triangulation needs at least 3 points");

  double xmin = pts[0][0], xmax = xmin, ymin = pts[0][1], ymax = ymin;
  for (const auto& p : pts) {
    xmin = std::min(xmin, p[0]);
    xmax = std::max(xmax, p[0]);
    ymin = std::min(ymin, p[1]);
    ymax = std::max(ymax, p[1]);
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-9});
  const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);

  std::vector<Vec2> v = pts;
  const std::size_t s0 = v.size(), s1 = s0 + 1, s2 = s0 + 2;
  // The enclosing triangle sits so far out that its circumcircles through a
  // hull edge bulge inward by less than ~1e-9 of the span; nearer anchors
  // visibly swallow points close to the hull into dropped triangles.
  const double far = 4.0e8 * span;
  v.push_back({cx - far, cy - 0.5 * far});
  v.push_back({cx + far, cy - 0.5 * far});
  v.push_back({cx, cy + far});

  std::vector<Triangle> tris{{{s0, s1, s2}}};

  auto is_bad = [&](const Triangle& t, const Vec2& p) {
    Vec2 a = v[t.v[0]], b = v[t.v[1]], c = v[t.v[2]];
    if (detail::orient2d(a, b, c) < 0.0) std::swap(b, c);
    double scale = 0.0;
    const double det = detail::incircle(a, b, c, p, &scale);
    // Ties (cocircular points) stay out of the cavity; the threshold is
    // relative so sliver triangles with tiny determinants classify right.
    return det > 1e-12 * scale;
  };

  for (std::size_t ip = 0; ip < pts.size(); ++ip) {
    const Vec2& p = v[ip];

    // Edge-to-triangle adjacency for this pass.
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> by_edge;
    for (std::size_t t = 0; t < tris.size(); ++t)
      for (int e = 0; e < 3; ++e) {
        auto a = tris[t].v[static_cast<std::size_t>(e)];
        auto b = tris[t].v[static_cast<std::size_t>((e + 1) % 3)];
        if (a > b) std::swap(a, b);
        by_edge[{a, b}].push_back(t);
      }

    // Seed the cavity with the triangle containing p, then grow only across
    // shared edges: a connected cavity keeps the retriangulation a disk even
    // when a distant sliver's circumcircle also covers p.
    std::size_t seed_tri = tris.size();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < tris.size(); ++t) {
      const Vec2 a = v[tris[t].v[0]], b = v[tris[t].v[1]], c = v[tris[t].v[2]];
      const double o = detail::orient2d(a, b, c);
      const double l1 = detail::orient2d(a, b, p) / o;
      const double l2 = detail::orient2d(b, c, p) / o;
      const double l3 = detail::orient2d(c, a, p) / o;
      const double worst = std::min({l1, l2, l3});
      if (worst > best) {
        best = worst;
        seed_tri = t;
      }
    }
    if (seed_tri == tris.size()) throw NumericError("triangulation lost its cover");

    std::vector<char> in_cavity(tris.size(), 0);
    std::vector<std::size_t> stack{seed_tri};
    in_cavity[seed_tri] = 1;
    while (!stack.empty()) {
      const std::size_t t = stack.back();
      stack.pop_back();
      for (int e = 0; e < 3; ++e) {
        auto a = tris[t].v[static_cast<std::size_t>(e)];
        auto b = tris[t].v[static_cast<std::size_t>((e + 1) % 3)];
        if (a > b) std::swap(a, b);
        for (std::size_t nb : by_edge[{a, b}]) {
          if (nb == t || in_cavity[nb]) continue;
          if (is_bad(tris[nb], p)) {
            in_cavity[nb] = 1;
            stack.push_back(nb);
          }
        }
      }
    }

    // Boundary of the cavity: edges used by exactly one cavity triangle.
    std::vector<std::array<std::size_t, 2>> edges;
    for (std::size_t t = 0; t < tris.size(); ++t) {
      if (!in_cavity[t]) continue;
      for (int e = 0; e < 3; ++e) {
        std::array<std::size_t, 2> edge{tris[t].v[static_cast<std::size_t>(e)],
                                        tris[t].v[static_cast<std::size_t>((e + 1) % 3)]};
        bool matched = false;
        for (auto it = edges.begin(); it != edges.end(); ++it) {
          if (((*it)[0] == edge[0] && (*it)[1] == edge[1]) ||
              ((*it)[0] == edge[1] && (*it)[1] == edge[0])) {
            edges.erase(it);
            matched = true;
            break;
          }
        }
        if (!matched) edges.push_back(edge);
      }
    }
    for (std::size_t t = tris.size(); t-- > 0;)
      if (in_cavity[t]) tris.erase(tris.begin() + static_cast<std::ptrdiff_t>(t));
    for (const auto& e : edges) tris.push_back({{e[0], e[1], ip}});
  }

  Triangulation out;
  out.points = pts;
  for (const auto& t : tris) {
    if (t.v[0] >= s0 || t.v[1] >= s0 || t.v[2] >= s0) continue;
    Triangle tt = t;
    // Store counterclockwise.
    if (detail::orient2d(pts[tt.v[0]], pts[tt.v[1]], pts[tt.v[2]]) < 0.0)
      std::swap(tt.v[1], tt.v[2]);
    out.triangles.push_back(tt);
  }
  if (out.triangles.empty()) throw ValidationError("triangulation degenerate (collinear points?)");
  return out;
}

/// Piecewise-cubic C1 scattered-data interpolant on the Clough-Tocher split
/// of a Delaunay triangulation. Vertex gradients are estimated by a weighted
/// least-squares plane fit over incident edges; the cross-edge derivative is
/// forced linear along every exterior edge, which closes the macro element.
class CtInterpolator {
 public:
  explicit CtInterpolator(std::vector<Vec2> pts) : tri_(triangulate(pts)) { build(); }
  explicit CtInterpolator(const Triangulation& tri) : tri_(tri) { build(); }

  const Triangulation& triangulation() const { return tri_; }
  std::size_t point_count() const { return tri_.points.size(); }

  /// Per-set-of-values state: 30 Bezier ordinates per macro triangle.
  struct Prepared {
    std::vector<std::array<std::array<double, 10>, 3>> coeff;  // [triangle][sub][ordinate]
  };

  /// Estimated vertex gradients for `values` (weighted LS over incident edges).
  std::vector<Vec2> estimate_gradients(const std::vector<double>& values) const {
    std::vector<Vec2> g(point_count(), {0.0, 0.0});
    for (std::size_t i = 0; i < point_count(); ++i) {
      const auto& fit = fits_[i];
      double r0 = 0.0, r1 = 0.0;
      for (const auto& nb : fit.nbrs) {
        const double df = values[nb.index] - values[i];
        r0 += nb.w * df * nb.d[0];
        r1 += nb.w * df * nb.d[1];
      }
      g[i] = {fit.inv[0] * r0 + fit.inv[1] * r1, fit.inv[2] * r0 + fit.inv[3] * r1};
    }
    return g;
  }

  Prepared prepare(const std::vector<double>& values) const {
    if (values.size() != point_count())
      throw ValidationError("value count does not match point count");
    for (double x : values)
      if (!std::isfinite(x)) throw ValidationError("non-finite interpolation value");
    const auto grad = estimate_gradients(values);

    Prepared prep;
    prep.coeff.resize(tri_.triangles.size());
    for (std::size_t t = 0; t < tri_.triangles.size(); ++t) {
      const auto& tv = tri_.triangles[t].v;
      const Vec2 V[3] = {tri_.points[tv[0]], tri_.points[tv[1]], tri_.points[tv[2]]};
      const Vec2 C = geo_[t].centroid;
      const double f[3] = {values[tv[0]], values[tv[1]], values[tv[2]]};
      const Vec2 gr[3] = {grad[tv[0]], grad[tv[1]], grad[tv[2]]};

      double tvec[3];  // ordinate at (2Vi + C)/3
      for (int i = 0; i < 3; ++i)
        tvec[i] = f[i] + (gr[i][0] * (C[0] - V[i][0]) + gr[i][1] * (C[1] - V[i][1])) / 3.0;

      double r[3];
      for (int k = 0; k < 3; ++k) {
        const int a = k, b = (k + 1) % 3;
        const double b300 = f[a];
        const double b030 = f[b];
        const double b210 =
            f[a] + (gr[a][0] * (V[b][0] - V[a][0]) + gr[a][1] * (V[b][1] - V[a][1])) / 3.0;
        const double b120 =
            f[b] + (gr[b][0] * (V[a][0] - V[b][0]) + gr[b][1] * (V[a][1] - V[b][1])) / 3.0;
        const double b201 = tvec[a];
        const double b021 = tvec[b];
        const auto& mu = geo_[t].mu[k];
        r[k] = (0.5 * mu[0] * (b300 + b120) + 0.5 * mu[1] * (b210 + b030) +
                0.5 * mu[2] * (b201 + b021) - mu[0] * b210 - mu[1] * b120) /
               mu[2];
        auto& cc = prep.coeff[t][static_cast<std::size_t>(k)];
        cc[0] = b300;
        cc[1] = b030;
        cc[3] = b210;
        cc[4] = b120;
        cc[5] = b201;
        cc[6] = b021;
      }
      double q[3];
      for (int i = 0; i < 3; ++i) {
        const int prev = (i + 2) % 3;
        q[i] = (r[i] + r[prev] + tvec[i]) / 3.0;
      }
      const double s = (q[0] + q[1] + q[2]) / 3.0;
      for (int k = 0; k < 3; ++k) {
        auto& cc = prep.coeff[t][static_cast<std::size_t>(k)];
        cc[2] = s;
        cc[7] = q[k];
        cc[8] = q[(k + 1) % 3];
        cc[9] = r[k];
      }
    }
    return prep;
  }

  /// Macro triangle + subtriangle + barycentric location of one query point.
  struct Location {
    std::int32_t triangle = -1;  // -1 = outside hull
    std::int32_t sub = 0;
    std::array<double, 3> lambda{};
  };

  Location locate(double u, double v) const {
    Location loc;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < tri_.triangles.size(); ++t) {
      const auto lam = macro_barycentric(t, u, v);
      const double worst = std::min({lam[0], lam[1], lam[2]});
      if (worst > best) {
        best = worst;
        loc.triangle = static_cast<std::int32_t>(t);
      }
      if (worst >= -1e-12) break;
    }
    if (best < -1e-9) {
      loc.triangle = -1;
      return loc;
    }
    const auto t = static_cast<std::size_t>(loc.triangle);
    // Pick the subtriangle whose barycentrics are least negative.
    double subbest = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      const auto lam = sub_barycentric(t, k, u, v);
      const double worst = std::min({lam[0], lam[1], lam[2]});
      if (worst > subbest) {
        subbest = worst;
        loc.sub = k;
        loc.lambda = lam;
      }
    }
    return loc;
  }

  static double eval_cubic(const std::array<double, 10>& c, const std::array<double, 3>& l) {
    const double l1 = l[0], l2 = l[1], l3 = l[2];
    return c[0] * l1 * l1 * l1 + c[1] * l2 * l2 * l2 + c[2] * l3 * l3 * l3 +
           3.0 * (c[3] * l1 * l1 * l2 + c[5] * l1 * l1 * l3 + c[4] * l1 * l2 * l2 +
                  c[6] * l2 * l2 * l3 + c[7] * l1 * l3 * l3 + c[8] * l2 * l3 * l3) +
           6.0 * c[9] * l1 * l2 * l3;
  }

  double evaluate(const Prepared& prep, const Location& loc) const {
    if (loc.triangle < 0) return 0.0;
    return eval_cubic(prep.coeff[static_cast<std::size_t>(loc.triangle)]
                               [static_cast<std::size_t>(loc.sub)],
                      loc.lambda);
  }

  /// One-off evaluation; `inside` reports hull membership.
  double evaluate_at(const std::vector<double>& values, double u, double v,
                     bool* inside = nullptr) const {
    const auto prep = prepare(values);
    const auto loc = locate(u, v);
    if (inside) *inside = loc.triangle >= 0;
    return evaluate(prep, loc);
  }

  std::array<double, 3> macro_barycentric(std::size_t t, double u, double v) const {
    const auto& g = geo_[t];
    const double du = u - g.v0[0], dv = v - g.v0[1];
    const double l1 = g.macro_inv[0] * du + g.macro_inv[1] * dv;
    const double l2 = g.macro_inv[2] * du + g.macro_inv[3] * dv;
    return {1.0 - l1 - l2, l1, l2};
  }

  std::array<double, 3> sub_barycentric(std::size_t t, int k, double u, double v) const {
    const auto& g = geo_[t];
    const auto& inv = g.sub_inv[k];
    const double du = u - g.sub_origin[k][0], dv = v - g.sub_origin[k][1];
    const double l2 = inv[0] * du + inv[1] * dv;
    const double l3 = inv[2] * du + inv[3] * dv;
    return {1.0 - l2 - l3, l2, l3};
  }

 private:
  struct Neighbor {
    std::size_t index;
    double w;
    Vec2 d;  // neighbor - vertex
  };
  struct VertexFit {
    std::vector<Neighbor> nbrs;
    std::array<double, 4> inv;  // inverse of the 2x2 normal matrix
  };
  struct TriGeo {
    Vec2 centroid;
    Vec2 v0;
    std::array<double, 4> macro_inv;
    std::array<Vec2, 3> sub_origin;
    std::array<std::array<double, 4>, 3> sub_inv;
    std::array<std::array<double, 3>, 3> mu;  // per sub: barycentric direction of the edge normal
  };

  static std::array<double, 4> invert2x2(double a, double b, double c, double d) {
    const double det = a * d - b * c;
    if (std::abs(det) < 1e-300) throw NumericError("degenerate triangle in interpolation");
    return {d / det, -b / det, -c / det, a / det};
  }

  void build() {
    const auto& pts = tri_.points;
    // Vertex fits from unique incident edges.
    fits_.resize(pts.size());
    std::vector<std::vector<std::size_t>> adj(pts.size());
    for (const auto& t : tri_.triangles) {
      for (int e = 0; e < 3; ++e) {
        const std::size_t a = t.v[static_cast<std::size_t>(e)];
        const std::size_t b = t.v[static_cast<std::size_t>((e + 1) % 3)];
        adj[a].push_back(b);
        adj[b].push_back(a);
      }
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto& nb = adj[i];
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
      double m00 = 0.0, m01 = 0.0, m11 = 0.0;
      for (std::size_t j : nb) {
        const Vec2 d{pts[j][0] - pts[i][0], pts[j][1] - pts[i][1]};
        const double len2 = d[0] * d[0] + d[1] * d[1];
        const double w = 1.0 / std::max(len2, 1e-300);
        fits_[i].nbrs.push_back({j, w, d});
        m00 += w * d[0] * d[0];
        m01 += w * d[0] * d[1];
        m11 += w * d[1] * d[1];
      }
      const double tr = m00 + m11;
      fits_[i].inv = invert2x2(m00 + 1e-14 * tr, m01, m01, m11 + 1e-14 * tr);
    }

    geo_.resize(tri_.triangles.size());
    for (std::size_t t = 0; t < tri_.triangles.size(); ++t) {
      const auto& tv = tri_.triangles[t].v;
      const Vec2 V[3] = {pts[tv[0]], pts[tv[1]], pts[tv[2]]};
      TriGeo g;
      g.centroid = {(V[0][0] + V[1][0] + V[2][0]) / 3.0, (V[0][1] + V[1][1] + V[2][1]) / 3.0};
      g.v0 = V[0];
      g.macro_inv = bary_inverse(V[0], V[1], V[2]);
      for (int k = 0; k < 3; ++k) {
        const Vec2 a = V[k], b = V[(k + 1) % 3];
        g.sub_origin[k] = a;
        g.sub_inv[k] = bary_inverse(a, b, g.centroid);
        // Edge normal expressed as a barycentric direction of (a, b, centroid).
        const Vec2 w{-(b[1] - a[1]), b[0] - a[0]};
        const auto inv = invert2x2(a[0] - g.centroid[0], b[0] - g.centroid[0],
                                   a[1] - g.centroid[1], b[1] - g.centroid[1]);
        const double mu1 = inv[0] * w[0] + inv[1] * w[1];
        const double mu2 = inv[2] * w[0] + inv[3] * w[1];
        g.mu[k] = {mu1, mu2, -mu1 - mu2};
        if (std::abs(g.mu[k][2]) < 1e-300) throw NumericError("degenerate Clough-Tocher split");
      }
      geo_[t] = g;
    }
  }

  /// Inverse map from Cartesian offsets (p - A) to barycentrics (l2, l3)
  /// of triangle (A, B, C).
  static std::array<double, 4> bary_inverse(const Vec2& a, const Vec2& b, const Vec2& c) {
    return invert2x2(b[0] - a[0], c[0] - a[0], b[1] - a[1], c[1] - a[1]);
  }

  Triangulation tri_;
  std::vector<VertexFit> fits_;
  std::vector<TriGeo> geo_;
};

/// Square pixel grid over the projected points: tight bounding square plus
/// a 5% margin, shared by every frame rendered from one montage.
struct GridSpec {
  double u0 = 0.0, v0 = 0.0;  // center of pixel (0,0): row 0 = v0, col 0 = u0
  double step = 0.0;
  std::size_t n = 0;

  double u_at(std::size_t col) const { return u0 + static_cast<double>(col) * step; }
  double v_at(std::size_t row) const { return v0 + static_cast<double>(row) * step; }
};

inline GridSpec make_grid(const std::vector<Vec2>& pts, std::size_t n, double margin = 0.05) {
  if (pts.empty() || n == 0) throw ValidationError("empty grid request");
  double umin = pts[0][0], umax = umin, vmin = pts[0][1], vmax = vmin;
  for (const auto& p : pts) {
    umin = std::min(umin, p[0]);
    umax = std::max(umax, p[0]);
    vmin = std::min(vmin, p[1]);
    vmax = std::max(vmax, p[1]);
  }
  const double cu = 0.5 * (umin + umax), cv = 0.5 * (vmin + vmax);
  double half = 0.5 * std::max(umax - umin, vmax - vmin);
  half = (half <= 0.0 ? 1.0 : half) * (1.0 + margin);
  GridSpec g;
  g.n = n;
  g.step = 2.0 * half / static_cast<double>(n);
  g.u0 = cu - half + 0.5 * g.step;
  g.v0 = cv - half + 0.5 * g.step;
  return g;
}

/// Pixel-to-subtriangle map, computed once per montage and reused for every
/// frame. Out-of-hull pixels evaluate to 0.
class GridSampler {
 public:
  GridSampler(const CtInterpolator& interp, const GridSpec& grid) : grid_(grid) {
    locs_.reserve(grid.n * grid.n);
    for (std::size_t r = 0; r < grid.n; ++r)
      for (std::size_t c = 0; c < grid.n; ++c) locs_.push_back(interp.locate(grid.u_at(c), grid.v_at(r)));
  }

  const GridSpec& grid() const { return grid_; }

  Matrix sample(const CtInterpolator& interp, const CtInterpolator::Prepared& prep) const {
    Matrix out(grid_.n, grid_.n, 0.0);
    std::size_t idx = 0;
    for (std::size_t r = 0; r < grid_.n; ++r)
      for (std::size_t c = 0; c < grid_.n; ++c, ++idx) out(r, c) = interp.evaluate(prep, locs_[idx]);
    return out;
  }

 private:
  GridSpec grid_;
  std::vector<CtInterpolator::Location> locs_;
};

/// Interpolates one set of per-electrode values onto an n x n grid.
inline Matrix ct_interpolate(const CtInterpolator& interp, const std::vector<double>& values,
                             const GridSpec& grid) {
  const auto prep = interp.prepare(values);
  Matrix out(grid.n, grid.n, 0.0);
  for (std::size_t r = 0; r < grid.n; ++r)
    for (std::size_t c = 0; c < grid.n; ++c) {
      const auto loc = interp.locate(grid.u_at(c), grid.v_at(r));
      out(r, c) = interp.evaluate(prep, loc);
    }
  return out;
}

/// 13 grayscale frames per band: the epoch is cut into 13 equal contiguous
/// segments, per-segment channel means are interpolated over the grid.
struct EegVideo {
  std::vector<std::vector<Matrix>> frames;  // [band][frame], each n x n
  GridSpec grid;
  std::size_t frame_count() const { return frames.empty() ? 0 : frames[0].size(); }
};

/// `power` switches the per-segment statistic from mean amplitude to mean
/// squared amplitude, which tracks a rhythm's envelope instead of its
/// phase-sensitive raw value.
inline EegVideo render_video(const bands::EpochBands& eb, const CtInterpolator& interp,
                             const GridSampler& sampler, std::size_t frame_count = 13,
                             bool power = false) {
  if (eb.data.empty()) throw ValidationError("no band data to render");
  const std::size_t L = eb.data[0].cols();
  if (L < frame_count)
    throw ValidationError("epoch length " + std::to_string(L) + " is shorter than " +
                          std::to_string(frame_count) + " frames");
  const std::size_t nch = eb.data[0].rows();
  if (nch != interp.point_count())
    throw ValidationError("channel count does not match montage");

  EegVideo video;
  video.grid = sampler.grid();
  video.frames.resize(eb.data.size());
  std::vector<double> means(nch);
  for (std::size_t b = 0; b < eb.data.size(); ++b) {
    video.frames[b].reserve(frame_count);
    for (std::size_t fidx = 0; fidx < frame_count; ++fidx) {
      const std::size_t t0 = fidx * L / frame_count;
      const std::size_t t1 = (fidx + 1) * L / frame_count;
      for (std::size_t c = 0; c < nch; ++c) {
        double acc = 0.0;
        for (std::size_t t = t0; t < t1; ++t) {
          const double x = eb.data[b](c, t);
          acc += power ? x * x : x;
        }
        means[c] = acc / static_cast<double>(t1 - t0);
      }
      const auto prep = interp.prepare(means);
      video.frames[b].push_back(sampler.sample(interp, prep));
    }
  }
  for (const auto& band : video.frames)
    for (const auto& f : band)
      if (!f.all_finite()) throw NumericError("non-finite pixel in rendered video");
  return video;
}

}  // namespace eegflow::topo
