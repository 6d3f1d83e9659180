#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "eegflow/core.hpp"

namespace eegflow::nn {

using Vec = std::vector<double>;

/// Named view of one parameter tensor and its gradient accumulator.
struct ParamRef {
  std::string name;
  Vec* value;
  Vec* grad;
  std::vector<std::size_t> dims;
};

inline double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

inline void init_uniform(Vec& w, double bound, Rng& rng) {
  for (double& x : w) x = rng.uniform(-bound, bound);
}

/// y = W x + b. Caches the last input for the backward pass, so a layer
/// instance handles one sample at a time; batches accumulate gradients
/// across consecutive forward/backward pairs.
class Dense {
 public:
  Dense(std::string name, std::size_t in, std::size_t out, Rng& rng)
      : name_(std::move(name)), in_(in), out_(out), w_(in * out), b_(out, 0.0),
        wg_(in * out, 0.0), bg_(out, 0.0) {
    init_uniform(w_, glorot_bound(in, out), rng);
  }

  std::size_t in_size() const { return in_; }
  std::size_t out_size() const { return out_; }

  Vec forward(const Vec& x) {
    x_ = x;
    Vec y(out_);
    for (std::size_t o = 0; o < out_; ++o) {
      double acc = b_[o];
      const double* row = &w_[o * in_];
      for (std::size_t i = 0; i < in_; ++i) acc += row[i] * x[i];
      y[o] = acc;
    }
    return y;
  }

  Vec backward(const Vec& dy) {
    Vec dx(in_, 0.0);
    for (std::size_t o = 0; o < out_; ++o) {
      const double g = dy[o];
      bg_[o] += g;
      double* wrow = &wg_[o * in_];
      const double* row = &w_[o * in_];
      for (std::size_t i = 0; i < in_; ++i) {
        wrow[i] += g * x_[i];
        dx[i] += g * row[i];
      }
    }
    return dx;
  }

  void collect(std::vector<ParamRef>& out) {
    out.push_back({name_ + ".w", &w_, &wg_, {out_, in_}});
    out.push_back({name_ + ".b", &b_, &bg_, {out_}});
  }

 private:
  std::string name_;
  std::size_t in_, out_;
  Vec w_, b_, wg_, bg_, x_;
};

/// 2D convolution over a (C, H, W) tensor, stride 1, zero padding.
class Conv2d {
 public:
  Conv2d(std::string name, std::size_t cin, std::size_t cout, std::size_t ksize, std::size_t pad,
         Rng& rng)
      : name_(std::move(name)), cin_(cin), cout_(cout), k_(ksize), pad_(pad),
        w_(cout * cin * ksize * ksize), b_(cout, 0.0), wg_(w_.size(), 0.0), bg_(cout, 0.0) {
    init_uniform(w_, glorot_bound(cin * ksize * ksize, cout * ksize * ksize), rng);
  }

  std::size_t out_channels() const { return cout_; }

  Vec forward(const Vec& x, std::size_t h, std::size_t w) {
    x_ = x;
    h_ = h;
    w_in_ = w;
    const std::size_t oh = h + 2 * pad_ - k_ + 1, ow = w + 2 * pad_ - k_ + 1;
    oh_ = oh;
    ow_ = ow;
    Vec y(cout_ * oh * ow);
    for (std::size_t oc = 0; oc < cout_; ++oc)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = b_[oc];
          for (std::size_t ic = 0; ic < cin_; ++ic)
            for (std::size_t ky = 0; ky < k_; ++ky) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(pad_);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t kx = 0; kx < k_; ++kx) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(pad_);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                acc += w_[((oc * cin_ + ic) * k_ + ky) * k_ + kx] *
                       x[(ic * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)];
              }
            }
          y[(oc * oh + oy) * ow + ox] = acc;
        }
    return y;
  }

  Vec backward(const Vec& dy) {
    Vec dx(x_.size(), 0.0);
    for (std::size_t oc = 0; oc < cout_; ++oc)
      for (std::size_t oy = 0; oy < oh_; ++oy)
        for (std::size_t ox = 0; ox < ow_; ++ox) {
          const double g = dy[(oc * oh_ + oy) * ow_ + ox];
          if (g == 0.0) continue;
          bg_[oc] += g;
          for (std::size_t ic = 0; ic < cin_; ++ic)
            for (std::size_t ky = 0; ky < k_; ++ky) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(pad_);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h_)) continue;
              for (std::size_t kx = 0; kx < k_; ++kx) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(pad_);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w_in_)) continue;
                const std::size_t xi =
                    (ic * h_ + static_cast<std::size_t>(iy)) * w_in_ + static_cast<std::size_t>(ix);
                const std::size_t wi = ((oc * cin_ + ic) * k_ + ky) * k_ + kx;
                wg_[wi] += g * x_[xi];
                dx[xi] += g * w_[wi];
              }
            }
        }
    return dx;
  }

  void collect(std::vector<ParamRef>& out) {
    out.push_back({name_ + ".w", &w_, &wg_, {cout_, cin_, k_, k_}});
    out.push_back({name_ + ".b", &b_, &bg_, {cout_}});
  }

 private:
  std::string name_;
  std::size_t cin_, cout_, k_, pad_;
  Vec w_, b_, wg_, bg_;
  Vec x_;
  std::size_t h_ = 0, w_in_ = 0, oh_ = 0, ow_ = 0;
};

class Relu {
 public:
  Vec forward(const Vec& x) {
    mask_.assign(x.size(), 0);
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask_[i] = x[i] > 0.0;
      y[i] = mask_[i] ? x[i] : 0.0;
    }
    return y;
  }
  Vec backward(const Vec& dy) {
    Vec dx(dy.size());
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = mask_[i] ? dy[i] : 0.0;
    return dx;
  }

 private:
  std::vector<char> mask_;
};

/// 2x2 max pooling, stride 2; spatial dims must be even.
class MaxPool2 {
 public:
  Vec forward(const Vec& x, std::size_t channels, std::size_t h, std::size_t w) {
    if (h % 2 != 0 || w % 2 != 0) throw ValidationError("pooling needs even spatial dims");
    c_ = channels;
    h_ = h;
    w_ = w;
    const std::size_t oh = h / 2, ow = w / 2;
    Vec y(channels * oh * ow);
    arg_.assign(y.size(), 0);
    for (std::size_t ch = 0; ch < channels; ++ch)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          std::size_t best = (ch * h + 2 * oy) * w + 2 * ox;
          for (std::size_t dy2 = 0; dy2 < 2; ++dy2)
            for (std::size_t dx2 = 0; dx2 < 2; ++dx2) {
              const std::size_t idx = (ch * h + 2 * oy + dy2) * w + 2 * ox + dx2;
              if (x[idx] > x[best]) best = idx;
            }
          const std::size_t oi = (ch * oh + oy) * ow + ox;
          y[oi] = x[best];
          arg_[oi] = best;
        }
    return y;
  }

  Vec backward(const Vec& dy) {
    Vec dx(c_ * h_ * w_, 0.0);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[arg_[i]] += dy[i];
    return dx;
  }

 private:
  std::size_t c_ = 0, h_ = 0, w_ = 0;
  std::vector<std::size_t> arg_;
};

/// Inverted dropout; masks are drawn from the caller's generator so the
/// whole training run stays a pure function of its seed.
class Dropout {
 public:
  explicit Dropout(double rate) : rate_(rate) {}

  Vec forward(const Vec& x, Rng& rng, bool training) {
    if (!training || rate_ <= 0.0) {
      mask_.assign(x.size(), 1.0);
      return x;
    }
    const double keep = 1.0 - rate_;
    mask_.resize(x.size());
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask_[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
      y[i] = x[i] * mask_[i];
    }
    return y;
  }

  Vec backward(const Vec& dy) const {
    Vec dx(dy.size());
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask_[i];
    return dx;
  }

 private:
  double rate_;
  Vec mask_;
};

inline Vec softmax(const Vec& logits) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  Vec p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

inline double clamped_log(double p) { return std::log(std::max(p, 1e-12)); }

/// -log p[label] over a probability vector.
inline double cross_entropy(const Vec& probs, std::size_t label) {
  return -clamped_log(probs[label]);
}

/// d(cross_entropy(softmax(z), label))/dz = p - onehot.
inline Vec softmax_ce_grad(const Vec& probs, std::size_t label) {
  Vec g = probs;
  g[label] -= 1.0;
  return g;
}

/// Cross-entropy of a probability vector against the uniform distribution.
inline double uniform_cross_entropy(const Vec& probs) {
  const double inv = 1.0 / static_cast<double>(probs.size());
  double acc = 0.0;
  for (double p : probs) acc -= inv * clamped_log(p);
  return acc;
}

/// d(uniform_cross_entropy(softmax(z)))/dz = p - 1/D.
inline Vec softmax_uniform_ce_grad(const Vec& probs) {
  const double inv = 1.0 / static_cast<double>(probs.size());
  Vec g = probs;
  for (double& v : g) v -= inv;
  return g;
}

inline void sgd_step(std::vector<ParamRef>& params, double lr, double scale) {
  for (auto& p : params) {
    for (std::size_t i = 0; i < p.value->size(); ++i) {
      const double g = (*p.grad)[i] * scale;
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + p.name);
      (*p.value)[i] -= lr * g;
    }
  }
}

inline void zero_grads(std::vector<ParamRef>& params) {
  for (auto& p : params) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

}  // namespace eegflow::nn
