#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "eegflow/pipeline.hpp"

using namespace eegflow;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& tag) {
  const auto dir = fs::temp_directory_path() / ("eegflow_pipeline_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_files(const std::string& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ext) ++n;
  return n;
}

pipeline::PipelineConfig tiny_config(const std::string& out) {
  pipeline::PipelineConfig c;
  c.synthetic = true;
  c.synth_classes = 3;
  c.synth_epochs_per_class = 5;
  c.out = out;
  c.grid = 16;
  c.frames = 5;
  c.jitter = 2;
  c.resample = 3;
  c.test_fraction = 0.2;
  c.proxy_synthetic = true;
  c.proxy_per_class = 4;
  c.image_classes = 4;
  c.joint_steps = 40;
  c.joint_batch = 8;
  c.flow_pool = 64;
  c.lstm_hidden = 12;
  c.fc_hidden = 8;
  c.cls_epochs = 50;
  c.cls_batch = 8;
  c.cls_lr = 0.1;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("config defaults match the reference constants") {
  const pipeline::PipelineConfig c;
  CHECK(c.resample == 50);
  CHECK(c.frames == 13);
  CHECK(c.grid == 32);
  CHECK(c.lstm_hidden == 128);
  CHECK(c.fc_hidden == 64);
  CHECK(c.dropout == doctest::Approx(0.25));
  CHECK(c.test_fraction == doctest::Approx(0.10));
  REQUIRE(c.fractions.size() == 3);
  CHECK(c.fractions[0] == doctest::Approx(1.0));
  CHECK(c.fractions[1] == doctest::Approx(0.5));
  CHECK(c.fractions[2] == doctest::Approx(0.25));
  CHECK(c.flow_sigma == doctest::Approx(1.1));
  CHECK(c.flow_radius == 3);
  CHECK(c.flow_smooth_radius == 5);
  CHECK(c.flow_iterations == 3);
}

TEST_CASE("config file parsing") {
  SUBCASE("keys, comments and fractions") {
    std::istringstream in(
        "# comment\n"
        "seed = 42\n"
        "alpha = 0.5   # inline comment\n"
        "fractions = 100, 50, 25\n"
        "synthetic = true\n"
        "out = somewhere\n");
    const auto c = pipeline::parse_config_text(in, "test");
    CHECK(c.seed == 42);
    CHECK(c.alpha == doctest::Approx(0.5));
    CHECK(c.synthetic);
    CHECK(c.out == "somewhere");
    REQUIRE(c.fractions.size() == 3);
    CHECK(c.fractions[2] == doctest::Approx(0.25));
  }
  SUBCASE("unknown keys are rejected") {
    std::istringstream in("alpa = 0.5\n");
    CHECK_THROWS_AS(pipeline::parse_config_text(in, "test"), ValidationError);
  }
  SUBCASE("validation catches bad values") {
    pipeline::PipelineConfig c;
    c.synthetic = true;
    c.grid = 30;  // not a multiple of 4
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.grid = 32;
    c.test_fraction = 1.5;
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }
  SUBCASE("file paths are required without the synthetic generator") {
    pipeline::PipelineConfig c;
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }
}

TEST_CASE("cmd_convert on synthetic data") {
  auto cfg = tiny_config(fresh_dir("convert"));
  const auto res = pipeline::cmd_convert(cfg);

  SUBCASE("container count = sources x resample") {
    CHECK(res.sources == 15);
    CHECK(res.containers == 45);
    CHECK(res.dropped == 0);
    CHECK(count_files(cfg.out + "/flow", ".eegf") == 45);
  }
  SUBCASE("manifest accounting matches") {
    const auto rows = pipeline::detail::read_manifest(cfg.out + "/manifest.csv");
    CHECK(rows.size() == res.containers);
    CHECK(rows.size() == res.sources * cfg.resample - 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].id == i);
      CHECK(rows[i].source == i / cfg.resample);
      CHECK(std::llabs(rows[i].offset) <= static_cast<long long>(cfg.jitter));
    }
  }
  SUBCASE("containers carry 5 bands and frames-1 pairs") {
    const auto v = io::read_flow_container(cfg.out + "/flow/epoch_000000.eegf");
    CHECK(v.band_count() == 5);
    CHECK(v.pair_count() == cfg.frames - 1);
    CHECK(v.fields[0][0].dx.rows() == cfg.grid);
  }
  SUBCASE("rerun into another directory is byte-identical") {
    auto cfg2 = cfg;
    cfg2.out = fresh_dir("convert_b");
    pipeline::cmd_convert(cfg2);
    CHECK(slurp(cfg.out + "/manifest.csv") == slurp(cfg2.out + "/manifest.csv"));
    CHECK(slurp(cfg.out + "/recording.csv") == slurp(cfg2.out + "/recording.csv"));
    CHECK(slurp(cfg.out + "/flow/epoch_000007.eegf") ==
          slurp(cfg2.out + "/flow/epoch_000007.eegf"));
  }
}

TEST_CASE("cmd_convert file-based edge cases") {
  const std::string dir = fresh_dir("files");
  // A 4-electrode montage and a recording with one usable event, one event
  // whose window overruns the end, and constant signal (so flow is zero).
  {
    std::ofstream m(dir + "/montage.csv");
    m << "A,0,0,1\n";
    m << "B," << std::sin(0.4) << ",0," << std::cos(0.4) << "\n";
    m << "C,0," << std::sin(0.4) << "," << std::cos(0.4) << "\n";
    m << "D," << -std::sin(0.4) << ",0," << std::cos(0.4) << "\n";
  }
  const std::size_t total = 400;
  {
    std::ofstream r(dir + "/rec.csv");
    r << "time,A,B,C,D,stim\n";
    for (std::size_t t = 0; t < total; ++t) {
      r << (static_cast<double>(t) / 128.0);
      for (int c = 0; c < 4; ++c) r << "," << (1.0 + c);
      int stim = 0;
      if (t == 50) stim = 1;
      if (t == 390) stim = 1;  // window overruns
      r << "," << stim << "\n";
    }
  }

  pipeline::PipelineConfig cfg;
  cfg.recording = dir + "/rec.csv";
  cfg.montage = dir + "/montage.csv";
  cfg.event_map = "1:0";
  cfg.out = dir + "/out";
  cfg.grid = 16;
  cfg.frames = 5;
  cfg.window = 40;
  cfg.jitter = 2;
  cfg.resample = 2;
  cfg.seed = 9;

  SUBCASE("overrunning events are dropped and itemized") {
    const auto res = pipeline::cmd_convert(cfg);
    CHECK(res.sources == 1);
    CHECK(res.containers == 2);
    CHECK(res.dropped == 1);
    const auto drops = slurp(cfg.out + "/drops.csv");
    CHECK(drops.find("390") != std::string::npos);
  }
  SUBCASE("constant signal produces zero flow") {
    pipeline::cmd_convert(cfg);
    const auto v = io::read_flow_container(cfg.out + "/flow/epoch_000000.eegf");
    for (const auto& band : v.fields)
      for (const auto& f : band)
        for (std::size_t i = 0; i < f.dx.size(); ++i) {
          CHECK(std::abs(f.dx.raw()[i]) <= 1e-6);
          CHECK(std::abs(f.dy.raw()[i]) <= 1e-6);
        }
  }
  SUBCASE("a static epoch visualizes as black flow images") {
    pipeline::cmd_convert(cfg);
    pipeline::cmd_visualize(cfg, 0);
    const auto img = io::read_ppm(cfg.out + "/viz_0/flow_alpha_00.ppm");
    for (auto b : img.data) CHECK(b == 0);
  }
  SUBCASE("empty recording converts to zero containers, successfully") {
    std::ofstream r(dir + "/empty.csv");
    r << "time,A,B,C,D,stim\n";
    for (std::size_t t = 0; t < 100; ++t)
      r << (static_cast<double>(t) / 128.0) << ",0,0,0,0,0\n";
    r.close();
    auto cfg2 = cfg;
    cfg2.recording = dir + "/empty.csv";
    cfg2.out = dir + "/out_empty";
    const auto res = pipeline::cmd_convert(cfg2);
    CHECK(res.containers == 0);
    CHECK(res.dropped == 0);
    const auto rows = pipeline::detail::read_manifest(cfg2.out + "/manifest.csv");
    CHECK(rows.empty());
  }
}

TEST_CASE("cmd_train end to end on the synthetic set") {
  auto cfg = tiny_config(fresh_dir("train"));
  pipeline::cmd_convert(cfg);

  SUBCASE("learns above chance and writes every artifact") {
    const auto res = pipeline::cmd_train(cfg);
    CHECK(res.accuracy > 1.0 / 3.0);
    CHECK(fs::exists(cfg.out + "/model.eegm"));
    CHECK(fs::exists(cfg.out + "/joint_log.csv"));
    CHECK(fs::exists(cfg.out + "/classifier_log.csv"));
    CHECK(fs::exists(cfg.out + "/eval_report.csv"));
    const auto log = slurp(cfg.out + "/joint_log.csv");
    CHECK(log.rfind("step,L_img,L_adver_confusion,L_disc,disc_accuracy\n", 0) == 0);
    const auto report = slurp(cfg.out + "/eval_report.csv");
    CHECK(report.find("accuracy=") != std::string::npos);
  }
  SUBCASE("missing proxy images with alpha > 0 name the fix") {
    auto cfg2 = cfg;
    cfg2.proxy_synthetic = false;
    cfg2.alpha = 0.5;
    try {
      pipeline::cmd_train(cfg2);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("proxy") != std::string::npos);
    }
  }
  SUBCASE("snapshot holds extractor, heads and classifier tensors") {
    pipeline::cmd_train(cfg);
    const auto tensors = io::read_model_snapshot(cfg.out + "/model.eegm");
    bool extractor = false, disc = false, lstm = false;
    for (const auto& t : tensors) {
      if (t.name == "extractor.conv1.w") extractor = true;
      if (t.name == "discriminator.fc1.w") disc = true;
      if (t.name == "classifier.lstm1.wx") lstm = true;
    }
    CHECK(extractor);
    CHECK(disc);
    CHECK(lstm);
  }
}

TEST_CASE("cmd_train with last-conv fine-tuning enabled") {
  auto cfg = tiny_config(fresh_dir("finetune"));
  cfg.synth_classes = 2;
  cfg.synth_epochs_per_class = 4;
  cfg.cls_epochs = 4;
  cfg.resample = 2;
  cfg.finetune_last_conv = true;
  pipeline::cmd_convert(cfg);
  const auto res = pipeline::cmd_train(cfg);
  CHECK(res.report.confusion.size() == 2);
  CHECK(fs::exists(cfg.out + "/model.eegm"));
}

TEST_CASE("cmd_reduce_experiment shapes and the alpha-0 degeneracy") {
  auto cfg = tiny_config(fresh_dir("reduce"));
  cfg.synth_epochs_per_class = 4;
  cfg.resample = 2;
  cfg.cls_epochs = 10;
  cfg.joint_steps = 20;
  pipeline::cmd_convert(cfg);

  SUBCASE("rows are {100, 50, 25} x {joint, no_joint}") {
    const auto table = pipeline::cmd_reduce_experiment(cfg);
    REQUIRE(table.size() == 3);
    CHECK(table[0].fraction == doctest::Approx(100.0));
    CHECK(table[1].fraction == doctest::Approx(50.0));
    CHECK(table[2].fraction == doctest::Approx(25.0));
    const auto csv = slurp(cfg.out + "/reduce_experiment.csv");
    CHECK(csv.rfind("fraction,joint,no_joint\n", 0) == 0);
  }
  SUBCASE("alpha = 0 makes the joint column equal the no-joint column") {
    auto cfg2 = cfg;
    cfg2.alpha = 0.0;
    cfg2.out = fresh_dir("reduce_alpha0");
    pipeline::cmd_convert(cfg2);
    const auto table = pipeline::cmd_reduce_experiment(cfg2);
    for (const auto& row : table) CHECK(row.joint == row.no_joint);
  }
}

TEST_CASE("cmd_visualize writes frames, flow images and the heatmap") {
  auto cfg = tiny_config(fresh_dir("viz"));
  cfg.synth_epochs_per_class = 2;
  pipeline::cmd_convert(cfg);

  SUBCASE("frame and flow image counts per band") {
    pipeline::cmd_visualize(cfg, 3);
    const std::string dir = cfg.out + "/viz_3";
    CHECK(count_files(dir, ".pgm") == 5 * cfg.frames);
    CHECK(count_files(dir, ".ppm") == 5 * (cfg.frames - 1));
    CHECK(fs::exists(dir + "/frame_alpha_00.pgm"));
    CHECK(fs::exists(dir + "/flow_theta_03.ppm"));
  }
  SUBCASE("missing epoch ids are rejected") {
    CHECK_THROWS_AS(pipeline::cmd_visualize(cfg, 99999), ValidationError);
  }
  SUBCASE("an identity confusion matrix renders a diagonal heatmap") {
    {
      std::ofstream rep(cfg.out + "/eval_report.csv");
      rep << "2,0\n0,3\naccuracy=1\n";
    }
    pipeline::cmd_visualize(cfg, 0);
    const auto img = io::read_ppm(cfg.out + "/viz_0/confusion.ppm");
    CHECK(img.rows == 32);  // 2 classes x 16 px cells
    // On-diagonal cells red-hot, off-diagonal cells blue.
    CHECK(img.at(8, 8, 0) > 128);
    CHECK(img.at(8, 24, 0) == 0);
    CHECK(img.at(8, 24, 2) == 255);
  }
}
