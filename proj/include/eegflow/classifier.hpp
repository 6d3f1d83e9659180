#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "eegflow/core.hpp"
#include "eegflow/nn.hpp"

namespace eegflow::cls {

/// Standard LSTM layer (sigmoid gates, tanh candidate and cell output),
/// zero initial hidden and cell state. Caches one sequence for BPTT.
class LstmLayer {
 public:
  LstmLayer(std::string name, std::size_t in, std::size_t hidden, Rng& rng)
      : name_(std::move(name)), in_(in), h_(hidden), wx_(4 * hidden * in), wh_(4 * hidden * hidden),
        b_(4 * hidden, 0.0), wxg_(wx_.size(), 0.0), whg_(wh_.size(), 0.0), bg_(b_.size(), 0.0) {
    nn::init_uniform(wx_, nn::glorot_bound(in, hidden), rng);
    nn::init_uniform(wh_, nn::glorot_bound(hidden, hidden), rng);
  }

  std::size_t input_size() const { return in_; }
  std::size_t hidden_size() const { return h_; }

  /// Runs the recurrence over a sequence; returns one hidden state per step.
  std::vector<nn::Vec> forward_sequence(const std::vector<nn::Vec>& xs) {
    steps_.clear();
    steps_.reserve(xs.size());
    std::vector<nn::Vec> hs;
    nn::Vec h(h_, 0.0), c(h_, 0.0);
    for (const nn::Vec& x : xs) {
      if (x.size() != in_) throw ValidationError(name_ + ": input size mismatch");
      Step st;
      st.x = x;
      st.h_prev = h;
      st.c_prev = c;
      nn::Vec z(4 * h_, 0.0);
      for (std::size_t r = 0; r < 4 * h_; ++r) {
        double acc = b_[r];
        const double* wxr = &wx_[r * in_];
        for (std::size_t i = 0; i < in_; ++i) acc += wxr[i] * x[i];
        const double* whr = &wh_[r * h_];
        for (std::size_t i = 0; i < h_; ++i) acc += whr[i] * h[i];
        z[r] = acc;
      }
      st.gi.resize(h_);
      st.gf.resize(h_);
      st.gg.resize(h_);
      st.go.resize(h_);
      st.c.resize(h_);
      st.tc.resize(h_);
      nn::Vec hn(h_);
      for (std::size_t i = 0; i < h_; ++i) {
        st.gi[i] = sigmoid(z[i]);
        st.gf[i] = sigmoid(z[h_ + i]);
        st.gg[i] = std::tanh(z[2 * h_ + i]);
        st.go[i] = sigmoid(z[3 * h_ + i]);
        st.c[i] = st.gf[i] * c[i] + st.gi[i] * st.gg[i];
        st.tc[i] = std::tanh(st.c[i]);
        hn[i] = st.go[i] * st.tc[i];
      }
      h = hn;
      c = st.c;
      steps_.push_back(std::move(st));
      hs.push_back(h);
    }
    return hs;
  }

  /// BPTT over the cached sequence. `dh` holds the gradient arriving at
  /// each step's hidden output; returns the gradient of each input.
  std::vector<nn::Vec> backward_sequence(const std::vector<nn::Vec>& dh) {
    if (dh.size() != steps_.size()) throw ValidationError(name_ + ": BPTT length mismatch");
    std::vector<nn::Vec> dxs(steps_.size(), nn::Vec(in_, 0.0));
    nn::Vec dh_next(h_, 0.0), dc_next(h_, 0.0);
    for (std::size_t t = steps_.size(); t-- > 0;) {
      const Step& st = steps_[t];
      nn::Vec dht(h_);
      for (std::size_t i = 0; i < h_; ++i) dht[i] = dh[t][i] + dh_next[i];
      nn::Vec dz(4 * h_);
      nn::Vec dc(h_);
      for (std::size_t i = 0; i < h_; ++i) {
        const double dtc = dht[i] * st.go[i];
        dc[i] = dtc * (1.0 - st.tc[i] * st.tc[i]) + dc_next[i];
        const double di = dc[i] * st.gg[i];
        const double df = dc[i] * st.c_prev[i];
        const double dg = dc[i] * st.gi[i];
        const double do_ = dht[i] * st.tc[i];
        dz[i] = di * st.gi[i] * (1.0 - st.gi[i]);
        dz[h_ + i] = df * st.gf[i] * (1.0 - st.gf[i]);
        dz[2 * h_ + i] = dg * (1.0 - st.gg[i] * st.gg[i]);
        dz[3 * h_ + i] = do_ * st.go[i] * (1.0 - st.go[i]);
      }
      nn::Vec dhp(h_, 0.0);
      for (std::size_t r = 0; r < 4 * h_; ++r) {
        const double g = dz[r];
        if (g == 0.0) continue;
        bg_[r] += g;
        double* wxgr = &wxg_[r * in_];
        const double* wxr = &wx_[r * in_];
        for (std::size_t i = 0; i < in_; ++i) {
          wxgr[i] += g * st.x[i];
          dxs[t][i] += g * wxr[i];
        }
        double* whgr = &whg_[r * h_];
        const double* whr = &wh_[r * h_];
        for (std::size_t i = 0; i < h_; ++i) {
          whgr[i] += g * st.h_prev[i];
          dhp[i] += g * whr[i];
        }
      }
      dh_next = dhp;
      for (std::size_t i = 0; i < h_; ++i) dc_next[i] = dc[i] * st.gf[i];
    }
    return dxs;
  }

  void collect(std::vector<nn::ParamRef>& out) {
    out.push_back({name_ + ".wx", &wx_, &wxg_, {4 * h_, in_}});
    out.push_back({name_ + ".wh", &wh_, &whg_, {4 * h_, h_}});
    out.push_back({name_ + ".b", &b_, &bg_, {4 * h_}});
  }

 private:
  static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  struct Step {
    nn::Vec x, h_prev, c_prev;
    nn::Vec gi, gf, gg, go, c, tc;
  };

  std::string name_;
  std::size_t in_, h_;
  nn::Vec wx_, wh_, b_, wxg_, whg_, bg_;
  std::vector<Step> steps_;
};

struct ClassifierConfig {
  std::size_t feature_dim = 0;
  std::size_t classes = 12;
  std::size_t hidden = 128;   // per recurrent layer
  std::size_t fc = 64;
  double dropout = 0.25;
};

/// Sequence classifier: two LSTM layers, dropout on the final hidden
/// state, dense + rectifier, dense to class logits, softmax.
class ClassifierNet {
 public:
  ClassifierNet(const ClassifierConfig& cfg, Rng& rng)
      : cfg_(cfg),
        lstm1_("classifier.lstm1", cfg.feature_dim, cfg.hidden, rng),
        lstm2_("classifier.lstm2", cfg.hidden, cfg.hidden, rng),
        dropout_(cfg.dropout),
        fc1_("classifier.fc1", cfg.hidden, cfg.fc, rng),
        fc2_("classifier.fc2", cfg.fc, cfg.classes, rng) {
    if (cfg.feature_dim == 0 || cfg.classes == 0)
      throw ValidationError("classifier needs feature_dim and classes");
  }

  const ClassifierConfig& config() const { return cfg_; }

  /// Forward pass over one feature sequence. Training mode draws a dropout
  /// mask from `rng`; inference is deterministic.
  nn::Vec forward(const std::vector<nn::Vec>& seq, bool training, Rng& rng) {
    if (seq.empty()) throw ValidationError("empty feature sequence");
    seq_len_ = seq.size();
    const auto h1 = lstm1_.forward_sequence(seq);
    const auto h2 = lstm2_.forward_sequence(h1);
    nn::Vec x = dropout_.forward(h2.back(), rng, training);
    x = fc1_.forward(x);
    x = relu_.forward(x);
    return nn::softmax(fc2_.forward(x));
  }

  /// Backward from softmax-CE; call immediately after forward(). Returns
  /// the gradient of each input feature vector (used when fine-tuning the
  /// extractor underneath).
  std::vector<nn::Vec> backward(const nn::Vec& probs, std::size_t label, double scale) {
    nn::Vec dlogits = nn::softmax_ce_grad(probs, label);
    for (double& g : dlogits) g *= scale;
    nn::Vec d = fc2_.backward(dlogits);
    d = relu_.backward(d);
    d = fc1_.backward(d);
    d = dropout_.backward(d);
    std::vector<nn::Vec> dh2(seq_len_, nn::Vec(cfg_.hidden, 0.0));
    dh2.back() = d;
    const auto dh1 = lstm2_.backward_sequence(dh2);
    return lstm1_.backward_sequence(dh1);
  }

  std::vector<nn::ParamRef> params() {
    std::vector<nn::ParamRef> out;
    lstm1_.collect(out);
    lstm2_.collect(out);
    fc1_.collect(out);
    fc2_.collect(out);
    return out;
  }

 private:
  ClassifierConfig cfg_;
  LstmLayer lstm1_, lstm2_;
  nn::Dropout dropout_;
  nn::Dense fc1_, fc2_;
  nn::Relu relu_;
  std::size_t seq_len_ = 0;
};

/// Inference-time class probabilities (dropout disabled).
inline nn::Vec classify(ClassifierNet& net, const std::vector<nn::Vec>& features) {
  Rng unused(0);
  return net.forward(features, false, unused);
}

struct SequenceSample {
  std::vector<nn::Vec> features;  // one vector per flow frame
  std::size_t label = 0;
};

struct TrainConfig {
  double lr = 0.05;
  std::size_t epochs = 50;
  std::size_t batch = 16;
  std::uint64_t seed = 1;
};

struct EpochLogRow {
  std::size_t epoch;
  double loss;
  double train_accuracy;
};

/// Mini-batch gradient descent with backpropagation through time.
/// Dropout masks are drawn per sample from a stream forked off the seed.
inline std::vector<EpochLogRow> train_classifier(ClassifierNet& net,
                                                 const std::vector<SequenceSample>& data,
                                                 const TrainConfig& cfg) {
  if (data.empty()) throw ValidationError("classifier training set is empty");
  for (const auto& s : data)
    if (s.label >= net.config().classes)
      throw ValidationError("label " + std::to_string(s.label) + " out of range");

  Rng root(cfg.seed);
  Rng order_rng = root.fork(11);
  Rng drop_rng = root.fork(12);
  auto params = net.params();
  std::vector<EpochLogRow> log;

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t done = 0;
    while (done < order.size()) {
      const std::size_t take = std::min(cfg.batch, order.size() - done);
      nn::zero_grads(params);
      for (std::size_t k = 0; k < take; ++k) {
        const auto& sample = data[order[done + k]];
        const nn::Vec probs = net.forward(sample.features, true, drop_rng);
        loss_sum += nn::cross_entropy(probs, sample.label);
        const std::size_t argmax = static_cast<std::size_t>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
        if (argmax == sample.label) ++correct;
        net.backward(probs, sample.label, 1.0 / static_cast<double>(take));
      }
      nn::sgd_step(params, cfg.lr, 1.0);
      done += take;
    }
    nn::zero_grads(params);
    const double mean_loss = loss_sum / static_cast<double>(data.size());
    if (!std::isfinite(mean_loss) || mean_loss > 1e4)
      throw NumericError("classifier diverged at epoch " + std::to_string(epoch) + " (loss " +
                         std::to_string(mean_loss) + ")");
    log.push_back({epoch, mean_loss, static_cast<double>(correct) / static_cast<double>(data.size())});
  }
  return log;
}

struct EvalReport {
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

inline EvalReport evaluate(ClassifierNet& net, const std::vector<SequenceSample>& test) {
  if (test.empty()) throw ValidationError("empty test set");
  const std::size_t k = net.config().classes;
  EvalReport rep;
  rep.confusion.assign(k, std::vector<std::size_t>(k, 0));
  std::size_t correct = 0;
  for (const auto& s : test) {
    const nn::Vec probs = classify(net, s.features);
    const std::size_t argmax =
        static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    rep.confusion[s.label][argmax]++;
    if (argmax == s.label) ++correct;
  }
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  return rep;
}

}  // namespace eegflow::cls
