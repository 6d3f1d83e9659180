#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "eegflow/eegflow.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::string> out;
};

eegflow::pipeline::PipelineConfig load_config(const std::string& path, const Overrides& ov) {
  auto cfg = path.empty() ? eegflow::pipeline::PipelineConfig{}
                          : eegflow::pipeline::parse_config(path);
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.alpha) cfg.alpha = *ov.alpha;
  if (ov.out) cfg.out = *ov.out;
  return cfg;
}

void add_common(CLI::App* cmd, std::string& config_path, Overrides& ov) {
  cmd->add_option("--config", config_path, "key = value configuration file");
  cmd->add_option("--seed", [&ov](const CLI::results_t& r) {
    ov.seed = static_cast<std::uint64_t>(std::stoull(r[0]));
    return true;
  }, "override the run seed");
  cmd->add_option("--alpha", [&ov](const CLI::results_t& r) {
    ov.alpha = std::stod(r[0]);
    return true;
  }, "override the domain-confusion weight");
  cmd->add_option("--out", [&ov](const CLI::results_t& r) {
    ov.out = r[0];
    return true;
  }, "override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG optical flow pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;
  std::size_t epoch_id = 0;

  CLI::App* convert = app.add_subcommand("convert", "recording -> flow containers");
  add_common(convert, config_path, ov);
  CLI::App* train = app.add_subcommand("train", "joint training + classifier");
  add_common(train, config_path, ov);
  CLI::App* reduce = app.add_subcommand("reduce-experiment",
                                        "accuracy vs shrinking training set");
  add_common(reduce, config_path, ov);
  CLI::App* viz = app.add_subcommand("visualize", "frames, flow and confusion images");
  add_common(viz, config_path, ov);
  viz->add_option("--epoch", epoch_id, "resampled epoch id to render")->required();

  CLI11_PARSE(app, argc, argv);

  const char* stage = "cli";
  try {
    const auto cfg = load_config(config_path, ov);
    if (convert->parsed()) {
      stage = "convert";
      const auto res = eegflow::pipeline::cmd_convert(cfg);
      std::printf("convert: %zu containers from %zu sources (%zu dropped) -> %s\n",
                  res.containers, res.sources, res.dropped, cfg.out.c_str());
      if (res.containers == 0)
        std::fprintf(stderr, "convert: warning: no epochs produced (empty recording?)\n");
    } else if (train->parsed()) {
      stage = "train";
      const auto res = eegflow::pipeline::cmd_train(cfg);
      std::printf("train: test accuracy %.4f -> %s\n", res.accuracy, cfg.out.c_str());
    } else if (reduce->parsed()) {
      stage = "reduce-experiment";
      const auto table = eegflow::pipeline::cmd_reduce_experiment(cfg);
      std::printf("fraction,joint,no_joint\n");
      for (const auto& r : table)
        std::printf("%.0f,%.4f,%.4f\n", r.fraction, r.joint, r.no_joint);
    } else if (viz->parsed()) {
      stage = "visualize";
      eegflow::pipeline::cmd_visualize(cfg, epoch_id);
      std::printf("visualize: wrote %s/viz_%zu\n", cfg.out.c_str(), epoch_id);
    }
  } catch (const eegflow::NumericError& e) {
    std::fprintf(stderr, "%s: numerical failure: %s\n", stage, e.what());
    return 3;
  } catch (const eegflow::ValidationError& e) {
    std::fprintf(stderr, "%s: %s\n", stage, e.what());
    return 2;
  } catch (const eegflow::IoError& e) {
    std::fprintf(stderr, "%s: %s\n", stage, e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s: %s\n", stage, e.what());
    return 2;
  }
  return 0;
}
