#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "eegflow/core.hpp"
#include "eegflow/ingest.hpp"

namespace eegflow::bands {

struct Band {
  std::string name;
  double lo = 0.0;  // Hz
  double hi = 0.0;  // Hz
};

constexpr std::size_t kBandCount = 5;

/// The five stereotyped EEG rhythm bands, fixed order.
inline std::vector<Band> standard_bands() {
  return {{"alpha", 8.0, 13.0},
          {"beta", 14.0, 30.0},
          {"gamma", 31.0, 51.0},
          {"delta", 0.5, 3.0},
          {"theta", 4.0, 7.0}};
}

/// One band-filtered copy of an epoch per rhythm, in standard_bands() order.
struct EpochBands {
  std::vector<Band> bands;
  std::vector<Matrix> data;  // one channels x L matrix per band
};

/// Second-order section, a0 normalized to 1.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

/// Butterworth band-pass designed from an order-N analog prototype
/// (band-pass transform doubles the pole count), realized as N cascaded
/// biquads via the bilinear transform. Each section carries one zero at
/// z=1 and one at z=-1.
inline std::vector<Biquad> butter_bandpass(int order, double lo, double hi, double rate) {
  if (!(lo > 0.0) || !(lo < hi))
    throw ValidationError("band edges must satisfy 0 < lo < hi");
  if (!(hi < rate / 2.0))
    throw ValidationError("band edge " + std::to_string(hi) + " Hz is at or above Nyquist (" +
                          std::to_string(rate / 2.0) + " Hz)");
  using cd = std::complex<double>;
  const double fs2 = 2.0 * rate;
  const double wl = fs2 * std::tan(M_PI * lo / rate);
  const double wh = fs2 * std::tan(M_PI * hi / rate);
  const double w0 = std::sqrt(wl * wh);
  const double bw = wh - wl;

  // Low-pass prototype poles on the unit circle, then the low-pass to
  // band-pass substitution s -> (s^2 + w0^2)/(bw*s).
  std::vector<cd> poles;
  for (int k = 0; k < order; ++k) {
    const double theta = M_PI * (2.0 * k + order + 1.0) / (2.0 * order);
    const cd p = std::polar(1.0, theta);
    const cd half = p * (bw * 0.5);
    const cd disc = std::sqrt(half * half - cd(w0 * w0, 0.0));
    poles.push_back(half + disc);
    poles.push_back(half - disc);
  }

  // Bilinear transform. Analog zeros: `order` at s=0 (and as many at
  // infinity, which land on z=-1).
  cd denom(1.0, 0.0);
  std::vector<cd> zpoles;
  for (const cd& p : poles) {
    zpoles.push_back((cd(fs2, 0.0) + p) / (cd(fs2, 0.0) - p));
    denom *= (cd(fs2, 0.0) - p);
  }
  const cd kc = std::pow(cd(bw * fs2, 0.0), order) / denom;
  double gain = kc.real();
  if (std::abs(kc.imag()) > 1e-9 * std::abs(gain))
    throw NumericError("band-pass design produced a complex gain");

  // Pair conjugate poles into sections.
  std::vector<cd> upper;
  for (const cd& p : poles)
    if (p.imag() >= 0.0) upper.push_back((cd(fs2, 0.0) + p) / (cd(fs2, 0.0) - p));
  if (static_cast<int>(upper.size()) != order)
    throw NumericError("unexpected pole pairing in band-pass design");

  const double gsec = std::pow(std::abs(gain), 1.0 / order);
  std::vector<Biquad> sos;
  for (int k = 0; k < order; ++k) {
    Biquad s{};
    const double g = (k == 0 && gain < 0.0) ? -gsec : gsec;
    s.b0 = g;
    s.b1 = 0.0;
    s.b2 = -g;
    s.a1 = -2.0 * upper[k].real();
    s.a2 = std::norm(upper[k]);
    sos.push_back(s);
  }
  return sos;
}

namespace detail {

/// Transposed direct form II run of one section over a signal, starting
/// from states scaled for a steady input of `x0`.
inline void sosfilt_section(const Biquad& s, std::vector<double>& x, double x0) {
  const double h1 = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  double s1 = (h1 - s.b0) * x0;
  double s2 = (s.b2 - s.a2 * h1) * x0;
  for (double& v : x) {
    const double y = s.b0 * v + s1;
    s1 = s.b1 * v - s.a1 * y + s2;
    s2 = s.b2 * v - s.a2 * y;
    v = y;
  }
}

inline void sosfilt(const std::vector<Biquad>& sos, std::vector<double>& x) {
  double steady = x.empty() ? 0.0 : x.front();
  for (const Biquad& s : sos) {
    sosfilt_section(s, x, steady);
    steady *= (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  }
}

}  // namespace detail

/// Forward-backward (zero-phase) filtering with odd-reflect padding of one
/// settling length at each end.
inline std::vector<double> filtfilt(const std::vector<Biquad>& sos, const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) return x;
  const std::size_t padlen = std::min<std::size_t>(3 * (2 * sos.size() + 1), n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (std::size_t i = 0; i < padlen; ++i) ext.push_back(2.0 * x[0] - x[padlen - i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 0; i < padlen; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 2 - i]);

  detail::sosfilt(sos, ext);
  std::reverse(ext.begin(), ext.end());
  detail::sosfilt(sos, ext);
  std::reverse(ext.begin(), ext.end());

  return std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(padlen),
                             ext.begin() + static_cast<std::ptrdiff_t>(padlen + n));
}

/// Zero-phase band-pass of every channel of an epoch.
inline Matrix bandpass(const Matrix& epoch, const Band& band, double rate) {
  const auto sos = butter_bandpass(4, band.lo, band.hi, rate);
  Matrix out(epoch.rows(), epoch.cols());
  std::vector<double> ch(epoch.cols());
  for (std::size_t c = 0; c < epoch.rows(); ++c) {
    for (std::size_t t = 0; t < epoch.cols(); ++t) ch[t] = epoch(c, t);
    const auto filtered = filtfilt(sos, ch);
    for (std::size_t t = 0; t < epoch.cols(); ++t) out(c, t) = filtered[t];
  }
  return out;
}

/// All five rhythm bands of one epoch, standard order.
inline EpochBands rhythm_stack(const Matrix& epoch, double rate) {
  EpochBands out;
  out.bands = standard_bands();
  out.data.reserve(out.bands.size());
  for (const Band& b : out.bands) out.data.push_back(bandpass(epoch, b, rate));
  return out;
}

}  // namespace eegflow::bands
