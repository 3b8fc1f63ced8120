#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "vqacoin/config.hpp"
#include "vqacoin/error.hpp"

using namespace vqacoin;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  std::string path = std::string("/tmp/vqacoin_cfg_") + name;
  std::ofstream out(path, std::ios::trunc);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("default configuration matches the documented desk profile") {
  RunConfig cfg = RunConfig::defaults();
  ModelConfig m = cfg.model();
  CHECK(m.d_image == 64);
  CHECK(m.d_q_large == 64);
  CHECK(m.d_q_small == 32);
  CHECK(m.n_q_max == 14);
  CHECK(m.si_max == 40);
  CHECK(m.glimpses_image == 2);
  CHECK(m.glimpses_si == 1);
  TrainSchedule s = cfg.schedule();
  CHECK(s.epochs == 18);
  CHECK(s.warmup_epochs == 4);
  CHECK(s.lr_start == 0.05e-3);
  CHECK(s.lr_plateau == 0.2e-3);
  CHECK(s.plateau_until_epoch == 10);
  CHECK(s.decay == 0.25);
  CHECK(s.decay_epochs == std::vector<size_t>{12, 14, 15, 16, 17, 18});
  CHECK(s.clip_norm == 0.25);
  CHECK(cfg.seed() == 42);
  CHECK(!cfg.parallel_kernels());
  CHECK(!cfg.f32_kernels());
  CHECK(!cfg.pad_batches());
  m.validate();
  s.validate();
  cfg.datagen().validate();
}

TEST_CASE("full-size profile carries the large dimensions") {
  ModelConfig p = ModelConfig::full_size();
  CHECK(p.d_image == 2048);
  CHECK(p.d_q_large == 1024);
  CHECK(p.d_q_small == 512);
  CHECK(p.embed_dim == 300);
  CHECK(p.n_q_max == 14);
  CHECK(p.si_max == 40);
  CHECK(p.glimpses_image == 8);
  CHECK(p.glimpses_si == 1);
  CHECK(p.answer_count == 3129);
  CHECK(p.dropout_classifier == 0.5);
  CHECK(p.dropout_fc == 0.2);
  p.validate();
}

TEST_CASE("overrides parse JSON values, arrays and booleans included") {
  RunConfig cfg = RunConfig::defaults();
  cfg.apply_override("model.d_image=128");
  cfg.apply_override("train.plateau_until_epoch=4");  // so decays at 5 and 7 are legal
  cfg.apply_override("train.decay_epochs=[5,7]");
  cfg.apply_override("exec.parallel=true");
  cfg.apply_override("model.softmax_loss=true");
  cfg.apply_override("train.lr_start=0.001");
  CHECK(cfg.model().d_image == 128);
  CHECK(cfg.schedule().decay_epochs == std::vector<size_t>{5, 7});
  CHECK(cfg.parallel_kernels());
  CHECK(cfg.model().softmax_loss);
  CHECK(cfg.schedule().lr_start == 0.001);
}

TEST_CASE("unknown keys and malformed assignments fail loudly") {
  RunConfig cfg = RunConfig::defaults();
  try {
    cfg.apply_override("model.d_imag=128");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(std::string(e.what()).find("model.d_imag") != std::string::npos);
  }
  CHECK_THROWS_AS(cfg.apply_override("no_equals_sign"), Error);
  // type mismatch: string into a numeric knob
  CHECK_THROWS_AS(cfg.apply_override("model.d_image=wide"), Error);
  CHECK_THROWS_AS(cfg.apply_override("exec.parallel=3"), Error);
}

TEST_CASE("config files overlay defaults and reject unknown keys") {
  std::string good = write_temp(
      "good.json",
      R"({"model.d_q_small": 16, "train.epochs": 3, "train.warmup_epochs": 1,
          "train.plateau_until_epoch": 3, "train.decay_epochs": []})");
  RunConfig cfg = RunConfig::from_file(good);
  CHECK(cfg.model().d_q_small == 16);
  CHECK(cfg.schedule().epochs == 3);
  CHECK(cfg.model().d_image == 64);  // untouched knobs keep defaults

  std::string bad = write_temp("badkey.json", R"({"model.width": 9})");
  try {
    RunConfig::from_file(bad);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(std::string(e.what()).find("model.width") != std::string::npos);
    CHECK(std::string(e.what()).find("badkey.json") != std::string::npos);
  }
}

TEST_CASE("config file parse errors report the byte offset") {
  std::string broken = write_temp("broken.json", "{\"model.d_image\": 64,, }");
  try {
    RunConfig::from_file(broken);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(std::string(e.what()).find("parse error") != std::string::npos);
    CHECK(std::string(e.what()).find("broken.json") != std::string::npos);
  }
  CHECK_THROWS_AS(RunConfig::from_file("/nonexistent/run.json"), Error);
}

TEST_CASE("model validation rejects degenerate extents") {
  ModelConfig m = ModelConfig::desk();
  m.d_image = 0;
  CHECK_THROWS_AS(m.validate(), Error);
  m = ModelConfig::desk();
  m.dropout_classifier = 1.0;
  CHECK_THROWS_AS(m.validate(), Error);
  m = ModelConfig::desk();
  m.glimpses_si = 2;
  CHECK_THROWS_AS(m.validate(), Error);
}

TEST_CASE("schedule validation rejects inconsistent epochs") {
  TrainSchedule s;
  s.warmup_epochs = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = TrainSchedule{};
  s.warmup_epochs = 19;
  CHECK_THROWS_AS(s.validate(), Error);
  s = TrainSchedule{};
  s.plateau_until_epoch = 3;  // before warmup ends
  CHECK_THROWS_AS(s.validate(), Error);
  s = TrainSchedule{};
  s.decay = 1.5;
  CHECK_THROWS_AS(s.validate(), Error);
  s = TrainSchedule{};
  s.batch_size = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = TrainSchedule{};
  s.decay_epochs = {5};  // inside the plateau
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("datagen validation rejects inverted object ranges") {
  DataGenConfig d;
  d.objects_min = 9;
  d.objects_max = 4;
  CHECK_THROWS_AS(d.validate(), Error);
  d = DataGenConfig{};
  d.objects_max = 17;  // more objects than grid cells
  CHECK_THROWS_AS(d.validate(), Error);
  d = DataGenConfig{};
  d.noise_sigma = -0.5;
  CHECK_THROWS_AS(d.validate(), Error);
}

TEST_CASE("resolved object is the complete effective configuration") {
  RunConfig cfg = RunConfig::defaults();
  cfg.apply_override("seed=7");
  const nlohmann::json& r = cfg.resolved();
  CHECK(r.at("seed").get<uint64_t>() == 7);
  CHECK(r.at("model.d_image").get<size_t>() == 64);
  CHECK(r.at("train.epochs").get<size_t>() == 18);
  CHECK(r.contains("data.noise_sigma"));
}
