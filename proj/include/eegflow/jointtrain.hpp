#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "eegflow/core.hpp"
#include "eegflow/nn.hpp"

namespace eegflow::joint {

enum class Domain : int { image = 0, flow = 1 };
constexpr std::size_t kDomainCount = 2;

/// Mean over samples of the cross-entropy between each discriminator output
/// row and the uniform domain distribution. Minimal exactly when every row
/// is uniform.
inline double loss_adver_confusion(const std::vector<nn::Vec>& disc_out) {
  if (disc_out.empty()) throw ValidationError("confusion loss over empty batch");
  double acc = 0.0;
  for (const auto& row : disc_out) acc += nn::uniform_cross_entropy(row);
  return acc / static_cast<double>(disc_out.size());
}

/// Classification loss with the domain-confusion term folded in:
/// -log softmax(logits)[label] + alpha * confusion.
inline double loss_img(const nn::Vec& logits, std::size_t label, double confusion, double alpha) {
  if (!std::isfinite(alpha)) throw ValidationError("alpha must be finite");
  return nn::cross_entropy(nn::softmax(logits), label) + alpha * confusion;
}

/// Supervised cross-entropy of the discriminator against the true domain.
inline double loss_disc_supervised(const nn::Vec& disc_out, Domain domain) {
  return nn::cross_entropy(disc_out, static_cast<std::size_t>(domain));
}

struct ExtractorConfig {
  std::size_t image_channels = 3;
  std::size_t flow_channels = 10;
  std::size_t common_channels = 4;
  std::size_t height = 32;
  std::size_t width = 32;
};

/// Shared convolutional feature extractor with one 1x1 input adapter per
/// domain. Both domains map to the same feature dimensionality.
class FeatureExtractor {
 public:
  /// Both adapters draw from the same stream, so same-shaped domains start
  /// from the same input transform and only diverge through training.
  FeatureExtractor(const ExtractorConfig& cfg, Rng& rng)
      : cfg_(cfg),
        rng_adapters_(rng.fork(1)),
        rng_adapters_copy_(rng_adapters_),
        rng_convs_(rng.fork(2)),
        adapter_img_("extractor.adapter_img", cfg.image_channels, cfg.common_channels, 1, 0,
                     rng_adapters_),
        adapter_flow_("extractor.adapter_flow", cfg.flow_channels, cfg.common_channels, 1, 0,
                      rng_adapters_copy_),
        conv1_("extractor.conv1", cfg.common_channels, 8, 3, 1, rng_convs_),
        conv2_("extractor.conv2", 8, 16, 3, 1, rng_convs_) {
    if (cfg.height % 4 != 0 || cfg.width % 4 != 0)
      throw ValidationError("extractor input dims must be divisible by 4");
  }

  const ExtractorConfig& config() const { return cfg_; }

  std::size_t feature_dim() const { return 16 * (cfg_.height / 4) * (cfg_.width / 4); }

  nn::Vec forward(const nn::Vec& input, Domain domain) {
    const std::size_t expect =
        (domain == Domain::image ? cfg_.image_channels : cfg_.flow_channels) * cfg_.height *
        cfg_.width;
    if (input.size() != expect)
      throw ValidationError("extractor input size mismatch: got " + std::to_string(input.size()) +
                            ", want " + std::to_string(expect));
    domain_ = domain;
    nn::Conv2d& adapter = domain == Domain::image ? adapter_img_ : adapter_flow_;
    nn::Vec x = adapter.forward(input, cfg_.height, cfg_.width);
    x = conv1_.forward(x, cfg_.height, cfg_.width);
    x = relu1_.forward(x);
    x = pool1_.forward(x, 8, cfg_.height, cfg_.width);
    x = conv2_.forward(x, cfg_.height / 2, cfg_.width / 2);
    x = relu2_.forward(x);
    x = pool2_.forward(x, 16, cfg_.height / 2, cfg_.width / 2);
    return x;
  }

  /// Backward through the path cached by the last forward() call.
  void backward(const nn::Vec& dfeature) {
    nn::Vec d = pool2_.backward(dfeature);
    d = relu2_.backward(d);
    d = conv2_.backward(d);
    d = pool1_.backward(d);
    d = relu1_.backward(d);
    d = conv1_.backward(d);
    nn::Conv2d& adapter = domain_ == Domain::image ? adapter_img_ : adapter_flow_;
    adapter.backward(d);
  }

  /// Backward that stops after the last conv layer (fine-tuning hook).
  void backward_last_conv_only(const nn::Vec& dfeature) {
    nn::Vec d = pool2_.backward(dfeature);
    d = relu2_.backward(d);
    conv2_.backward(d);
  }

  std::vector<nn::ParamRef> params() {
    std::vector<nn::ParamRef> out;
    adapter_img_.collect(out);
    adapter_flow_.collect(out);
    conv1_.collect(out);
    conv2_.collect(out);
    return out;
  }

  std::vector<nn::ParamRef> last_conv_params() {
    std::vector<nn::ParamRef> out;
    conv2_.collect(out);
    return out;
  }

 private:
  ExtractorConfig cfg_;
  Rng rng_adapters_, rng_adapters_copy_, rng_convs_;
  nn::Conv2d adapter_img_, adapter_flow_, conv1_, conv2_;
  nn::Relu relu1_, relu2_;
  nn::MaxPool2 pool1_, pool2_;
  Domain domain_ = Domain::image;
};

/// Image-task head: one dense layer to K_img logits.
class ImageHead {
 public:
  ImageHead(std::size_t feature_dim, std::size_t classes, Rng& rng)
      : fc_("image_head.fc", feature_dim, classes, rng) {}

  nn::Vec logits(const nn::Vec& feature) { return fc_.forward(feature); }
  nn::Vec backward(const nn::Vec& dlogits) { return fc_.backward(dlogits); }
  std::vector<nn::ParamRef> params() {
    std::vector<nn::ParamRef> out;
    fc_.collect(out);
    return out;
  }

 private:
  nn::Dense fc_;
};

/// Domain discriminator: dense 64 + relu + dense D + softmax.
class Discriminator {
 public:
  Discriminator(std::size_t feature_dim, Rng& rng, std::size_t hidden = 64)
      : fc1_("discriminator.fc1", feature_dim, hidden, rng),
        fc2_("discriminator.fc2", hidden, kDomainCount, rng) {}

  nn::Vec probabilities(const nn::Vec& feature) {
    nn::Vec x = fc1_.forward(feature);
    x = relu_.forward(x);
    return nn::softmax(fc2_.forward(x));
  }

  nn::Vec backward(const nn::Vec& dlogits) {
    nn::Vec d = fc2_.backward(dlogits);
    d = relu_.backward(d);
    return fc1_.backward(d);
  }

  std::vector<nn::ParamRef> params() {
    std::vector<nn::ParamRef> out;
    fc1_.collect(out);
    fc2_.collect(out);
    return out;
  }

 private:
  nn::Dense fc1_, fc2_;
  nn::Relu relu_;
};

/// One alternating-optimization training batch: equal-size image and flow
/// sub-batches, both always non-empty.
struct JointBatch {
  std::vector<const nn::Vec*> images;
  std::vector<std::size_t> image_labels;
  std::vector<const nn::Vec*> flows;

  void validate() const {
    if (images.empty() || flows.empty())
      throw ValidationError("joint batch needs samples from both domains");
    if (images.size() != image_labels.size())
      throw ValidationError("image batch labels out of sync");
  }
};

struct JointModel {
  FeatureExtractor extractor;
  ImageHead image_head;
  Discriminator discriminator;

  /// Each component draws its initialization from an isolated stream of the
  /// root seed, so one component's parameter count cannot shift another's.
  JointModel(const ExtractorConfig& cfg, std::size_t image_classes, Rng rng_extr, Rng rng_head,
             Rng rng_disc)
      : extractor(cfg, rng_extr),
        image_head(extractor.feature_dim(), image_classes, rng_head),
        discriminator(extractor.feature_dim(), rng_disc) {}

  static JointModel make(const ExtractorConfig& cfg, std::size_t image_classes, const Rng& root) {
    return JointModel(cfg, image_classes, root.fork(1), root.fork(2), root.fork(3));
  }
};

struct StepStats {
  double loss_img = 0.0;         // composite image loss, batch mean
  double loss_confusion = 0.0;   // uniform-target cross entropy, batch mean
  double loss_disc = 0.0;        // supervised discriminator loss, batch mean
  double disc_accuracy = 0.0;    // before the discriminator update
};

namespace detail {

inline void check_divergence(double loss, const char* what, std::size_t step) {
  if (!std::isfinite(loss) || loss > 1e4)
    throw NumericError(std::string(what) + " diverged at step " + std::to_string(step) +
                       " (loss " + std::to_string(loss) + ")");
}

}  // namespace detail

/// One gradient step on the composite image loss with respect to extractor
/// and image-head parameters. The discriminator is frozen but gradients
/// flow through it: the confusion term sees both domains' features.
inline StepStats step_extractor(JointModel& m, const JointBatch& batch, double alpha, double lr) {
  batch.validate();
  auto extr_params = m.extractor.params();
  auto head_params = m.image_head.params();
  auto disc_params = m.discriminator.params();
  std::vector<nn::ParamRef> trained = extr_params;
  trained.insert(trained.end(), head_params.begin(), head_params.end());
  nn::zero_grads(trained);
  nn::zero_grads(disc_params);  // discriminator grads polluted below, never applied

  const std::size_t n_img = batch.images.size();
  const std::size_t n_all = n_img + batch.flows.size();
  StepStats stats;

  for (std::size_t i = 0; i < n_img; ++i) {
    const nn::Vec feat = m.extractor.forward(*batch.images[i], Domain::image);
    const nn::Vec probs = nn::softmax(m.image_head.logits(feat));
    stats.loss_img += nn::cross_entropy(probs, batch.image_labels[i]) / static_cast<double>(n_img);

    nn::Vec dlogits = nn::softmax_ce_grad(probs, batch.image_labels[i]);
    for (double& g : dlogits) g /= static_cast<double>(n_img);
    nn::Vec dfeat = m.image_head.backward(dlogits);

    const nn::Vec dprob = m.discriminator.probabilities(feat);
    stats.loss_confusion += nn::uniform_cross_entropy(dprob) / static_cast<double>(n_all);
    nn::Vec dconf = nn::softmax_uniform_ce_grad(dprob);
    for (double& g : dconf) g *= alpha / static_cast<double>(n_all);
    const nn::Vec dfeat_conf = m.discriminator.backward(dconf);
    for (std::size_t j = 0; j < dfeat.size(); ++j) dfeat[j] += dfeat_conf[j];

    m.extractor.backward(dfeat);
  }
  for (const nn::Vec* flow_sample : batch.flows) {
    const nn::Vec feat = m.extractor.forward(*flow_sample, Domain::flow);
    const nn::Vec dprob = m.discriminator.probabilities(feat);
    stats.loss_confusion += nn::uniform_cross_entropy(dprob) / static_cast<double>(n_all);
    nn::Vec dconf = nn::softmax_uniform_ce_grad(dprob);
    for (double& g : dconf) g *= alpha / static_cast<double>(n_all);
    m.extractor.backward(m.discriminator.backward(dconf));
  }

  stats.loss_img += alpha * stats.loss_confusion;
  nn::sgd_step(trained, lr, 1.0);
  nn::zero_grads(trained);
  nn::zero_grads(disc_params);
  return stats;
}

/// One supervised step of the discriminator on frozen features. The
/// extractor freezes here unless `update_extractor` opts into the literal
/// reading where it helps the discriminator.
inline StepStats step_discriminator(JointModel& m, const JointBatch& batch, double lr,
                                    bool update_extractor = false) {
  batch.validate();
  auto disc_params = m.discriminator.params();
  auto extr_params = m.extractor.params();
  nn::zero_grads(disc_params);
  nn::zero_grads(extr_params);

  const std::size_t n_all = batch.images.size() + batch.flows.size();
  StepStats stats;
  std::size_t correct = 0;

  auto run = [&](const nn::Vec& sample, Domain domain) {
    const nn::Vec feat = m.extractor.forward(sample, domain);
    const nn::Vec probs = m.discriminator.probabilities(feat);
    const auto truth = static_cast<std::size_t>(domain);
    stats.loss_disc += nn::cross_entropy(probs, truth) / static_cast<double>(n_all);
    const std::size_t argmax =
        static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    if (argmax == truth) ++correct;
    nn::Vec dlogits = nn::softmax_ce_grad(probs, truth);
    for (double& g : dlogits) g /= static_cast<double>(n_all);
    const nn::Vec dfeat = m.discriminator.backward(dlogits);
    if (update_extractor) m.extractor.backward(dfeat);
  };

  for (std::size_t i = 0; i < batch.images.size(); ++i) run(*batch.images[i], Domain::image);
  for (const nn::Vec* f : batch.flows) run(*f, Domain::flow);

  stats.disc_accuracy = static_cast<double>(correct) / static_cast<double>(n_all);
  nn::sgd_step(disc_params, lr, 1.0);
  if (update_extractor) nn::sgd_step(extr_params, lr, 1.0);
  nn::zero_grads(disc_params);
  nn::zero_grads(extr_params);
  return stats;
}

struct JointConfig {
  double alpha = 0.1;
  double lr = 0.05;
  double disc_lr = 0.05;
  std::size_t steps = 300;
  std::size_t batch_per_domain = 16;
  std::uint64_t seed = 1;
  bool disc_updates_extractor = false;
  std::size_t image_classes = 10;
  ExtractorConfig extractor;
};

struct JointLogRow {
  std::size_t step;
  double loss_img, loss_confusion, loss_disc, disc_accuracy;
};

struct JointResult {
  JointModel model;
  std::vector<JointLogRow> log;
};

struct ImageSample {
  nn::Vec pixels;  // image_channels * H * W
  std::size_t label;
};

/// Alternating optimization of the two goals, 1:1 schedule. Deterministic
/// per seed: initialization, image sampling and flow sampling each use an
/// isolated stream, so the alpha = 0 run stays bit-identical to the
/// image-only control.
inline JointResult joint_train(const std::vector<ImageSample>& images,
                               const std::vector<nn::Vec>& flows, const JointConfig& cfg) {
  if (images.empty() || flows.empty())
    throw ValidationError("joint training needs both image and flow samples");
  Rng root(cfg.seed);
  JointResult res{JointModel::make(cfg.extractor, cfg.image_classes, root), {}};
  Rng img_rng = root.fork(4);
  Rng flow_rng = root.fork(5);

  const std::size_t bsz = std::max<std::size_t>(1, cfg.batch_per_domain);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    JointBatch batch;
    for (std::size_t i = 0; i < bsz; ++i) {
      const auto idx = static_cast<std::size_t>(
          img_rng.uniform_int(0, static_cast<std::int64_t>(images.size()) - 1));
      batch.images.push_back(&images[idx].pixels);
      batch.image_labels.push_back(images[idx].label);
    }
    for (std::size_t i = 0; i < bsz; ++i) {
      const auto idx = static_cast<std::size_t>(
          flow_rng.uniform_int(0, static_cast<std::int64_t>(flows.size()) - 1));
      batch.flows.push_back(&flows[idx]);
    }

    const StepStats ex = step_extractor(res.model, batch, cfg.alpha, cfg.lr);
    detail::check_divergence(ex.loss_img, "joint training", step);
    const StepStats ds =
        step_discriminator(res.model, batch, cfg.disc_lr, cfg.disc_updates_extractor);
    detail::check_divergence(ds.loss_disc, "discriminator", step);

    res.log.push_back({step, ex.loss_img, ex.loss_confusion, ds.loss_disc, ds.disc_accuracy});
  }
  return res;
}

/// Control without an adversary: same initialization and image batch
/// stream as joint_train, plain classification updates only.
inline JointResult train_image_only(const std::vector<ImageSample>& images,
                                    const JointConfig& cfg) {
  if (images.empty()) throw ValidationError("image-only training needs samples");
  Rng root(cfg.seed);
  JointResult res{JointModel::make(cfg.extractor, cfg.image_classes, root), {}};
  Rng img_rng = root.fork(4);

  const std::size_t bsz = std::max<std::size_t>(1, cfg.batch_per_domain);
  auto extr_params = res.model.extractor.params();
  auto head_params = res.model.image_head.params();
  std::vector<nn::ParamRef> trained = extr_params;
  trained.insert(trained.end(), head_params.begin(), head_params.end());

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<const nn::Vec*> xs;
    std::vector<std::size_t> ys;
    for (std::size_t i = 0; i < bsz; ++i) {
      const auto idx = static_cast<std::size_t>(
          img_rng.uniform_int(0, static_cast<std::int64_t>(images.size()) - 1));
      xs.push_back(&images[idx].pixels);
      ys.push_back(images[idx].label);
    }
    nn::zero_grads(trained);
    double loss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const nn::Vec feat = res.model.extractor.forward(*xs[i], Domain::image);
      const nn::Vec probs = nn::softmax(res.model.image_head.logits(feat));
      loss += nn::cross_entropy(probs, ys[i]) / static_cast<double>(xs.size());
      nn::Vec dlogits = nn::softmax_ce_grad(probs, ys[i]);
      for (double& g : dlogits) g /= static_cast<double>(xs.size());
      res.model.extractor.backward(res.model.image_head.backward(dlogits));
    }
    detail::check_divergence(loss, "image-only training", step);
    nn::sgd_step(trained, cfg.lr, 1.0);
    nn::zero_grads(trained);
    res.log.push_back({step, loss, 0.0, 0.0, 0.0});
  }
  return res;
}

}  // namespace eegflow::joint
