#include "vqacoin/config.hpp"

#include <fstream>

#include "vqacoin/error.hpp"

namespace vqacoin {

using nlohmann::json;

ModelConfig ModelConfig::full_size() {
  ModelConfig c;
  c.d_image = 2048;
  c.d_q_large = 1024;
  c.d_q_small = 512;
  c.embed_dim = 300;
  c.n_q_max = 14;
  c.si_max = 40;
  c.glimpses_image = 8;
  c.glimpses_si = 1;
  c.answer_count = 3129;
  c.d_attn = 1024;
  c.d_cls_hidden = 2048;
  c.dropout_classifier = 0.5;
  c.dropout_fc = 0.2;
  return c;
}

void ModelConfig::validate() const {
  auto positive = [](size_t v, const char* name) {
    if (v == 0) throw config_error(std::string("model.") + name + " must be positive");
  };
  positive(d_image, "d_image");
  positive(d_q_large, "d_q_large");
  positive(d_q_small, "d_q_small");
  positive(embed_dim, "embed_dim");
  positive(n_q_max, "n_q_max");
  positive(si_max, "si_max");
  positive(glimpses_image, "glimpses_image");
  positive(d_attn, "d_attn");
  positive(d_cls_hidden, "d_cls_hidden");
  if (glimpses_si != 1) {
    throw config_error("model.glimpses_si must be 1 (the SI branch is single-glimpse)");
  }
  auto rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v < 1.0)) {
      throw config_error(std::string("model.") + name + " must lie in [0,1), got " +
                         std::to_string(v));
    }
  };
  rate(dropout_classifier, "dropout_classifier");
  rate(dropout_fc, "dropout_fc");
}

void TrainSchedule::validate() const {
  if (epochs == 0) throw config_error("train.epochs must be positive");
  if (warmup_epochs == 0 || warmup_epochs > epochs) {
    throw config_error("train.warmup_epochs must lie in [1, epochs]");
  }
  if (plateau_until_epoch < warmup_epochs || plateau_until_epoch > epochs) {
    throw config_error("train.plateau_until_epoch must lie in [warmup_epochs, epochs]");
  }
  if (!(lr_start > 0.0) || !(lr_plateau > 0.0)) {
    throw config_error("train learning rates must be positive");
  }
  if (!(decay > 0.0 && decay <= 1.0)) {
    throw config_error("train.decay must lie in (0,1], got " + std::to_string(decay));
  }
  for (size_t e : decay_epochs) {
    if (e <= plateau_until_epoch || e > epochs) {
      throw config_error("train.decay_epochs entry " + std::to_string(e) +
                         " outside (plateau_until_epoch, epochs]");
    }
  }
  if (batch_size == 0) throw config_error("train.batch_size must be positive");
  if (!(clip_norm > 0.0)) throw config_error("train.clip_norm must be positive");
}

void DataGenConfig::validate() const {
  if (train_examples == 0 || val_examples == 0) {
    throw config_error("data.train_examples and data.val_examples must be positive");
  }
  if (objects_min < 1 || objects_max > 16 || objects_min > objects_max) {
    throw config_error("data object count range must satisfy 1 <= min <= max <= 16, got [" +
                       std::to_string(objects_min) + "," + std::to_string(objects_max) + "]");
  }
  if (noise_sigma < 0.0) throw config_error("data.noise_sigma must be nonnegative");
  if (!(annotator_noise >= 0.0 && annotator_noise < 1.0)) {
    throw config_error("data.annotator_noise must lie in [0,1)");
  }
  if (answer_min_occurrences == 0) {
    throw config_error("data.answer_min_occurrences must be positive");
  }
}

namespace {

json default_values() {
  ModelConfig m;
  TrainSchedule t;
  DataGenConfig d;
  return json{
      {"seed", 42},
      {"exec.parallel", false},
      {"exec.f32", false},
      {"model.d_image", m.d_image},
      {"model.d_q_large", m.d_q_large},
      {"model.d_q_small", m.d_q_small},
      {"model.embed_dim", m.embed_dim},
      {"model.n_q_max", m.n_q_max},
      {"model.si_max", m.si_max},
      {"model.glimpses_image", m.glimpses_image},
      {"model.glimpses_si", m.glimpses_si},
      {"model.answer_count", m.answer_count},
      {"model.d_attn", m.d_attn},
      {"model.d_cls_hidden", m.d_cls_hidden},
      {"model.dropout_classifier", m.dropout_classifier},
      {"model.dropout_fc", m.dropout_fc},
      {"model.softmax_loss", m.softmax_loss},
      {"train.epochs", t.epochs},
      {"train.warmup_epochs", t.warmup_epochs},
      {"train.lr_start", t.lr_start},
      {"train.lr_plateau", t.lr_plateau},
      {"train.plateau_until_epoch", t.plateau_until_epoch},
      {"train.decay", t.decay},
      {"train.decay_epochs", t.decay_epochs},
      {"train.batch_size", t.batch_size},
      {"train.clip_norm", t.clip_norm},
      {"train.classifier_only", t.classifier_only},
      {"train.pad_batches", false},
      {"data.train_examples", d.train_examples},
      {"data.val_examples", d.val_examples},
      {"data.objects_min", d.objects_min},
      {"data.objects_max", d.objects_max},
      {"data.noise_sigma", d.noise_sigma},
      {"data.annotator_noise", d.annotator_noise},
      {"data.answer_min_occurrences", d.answer_min_occurrences},
      {"eval.exact_soft_accuracy", false},
  };
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

size_t as_extent(const json& v, const std::string& key) {
  if (!v.is_number() || (v.is_number_float() && v.get<double>() != static_cast<double>(v.get<long long>()))) {
    throw config_error("config key " + key + " must be an integer");
  }
  long long n = v.get<long long>();
  if (n < 0) throw config_error("config key " + key + " must be nonnegative");
  return static_cast<size_t>(n);
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.v_ = default_values();
  return c;
}

void RunConfig::set_checked(const std::string& key, json value, const std::string& origin) {
  auto it = v_.find(key);
  if (it == v_.end()) {
    throw config_error("unknown config key \"" + key + "\" (" + origin + ")");
  }
  if (!same_kind(*it, value)) {
    throw config_error("config key \"" + key + "\" expects " + std::string(it->type_name()) +
                       ", got " + std::string(value.type_name()) + " (" + origin + ")");
  }
  *it = std::move(value);
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw config_error("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw config_error("config file " + path + " must hold a JSON object");
  RunConfig c = defaults();
  for (auto& [key, value] : j.items()) {
    c.set_checked(key, value, "from " + path);
  }
  return c;
}

void RunConfig::apply_override(const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw config_error("override must look like key=value, got \"" + assignment + "\"");
  }
  std::string key = assignment.substr(0, eq);
  std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;  // unquoted string value
  set_checked(key, std::move(value), "from --set");
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.d_image = as_extent(v_.at("model.d_image"), "model.d_image");
  m.d_q_large = as_extent(v_.at("model.d_q_large"), "model.d_q_large");
  m.d_q_small = as_extent(v_.at("model.d_q_small"), "model.d_q_small");
  m.embed_dim = as_extent(v_.at("model.embed_dim"), "model.embed_dim");
  m.n_q_max = as_extent(v_.at("model.n_q_max"), "model.n_q_max");
  m.si_max = as_extent(v_.at("model.si_max"), "model.si_max");
  m.glimpses_image = as_extent(v_.at("model.glimpses_image"), "model.glimpses_image");
  m.glimpses_si = as_extent(v_.at("model.glimpses_si"), "model.glimpses_si");
  m.answer_count = as_extent(v_.at("model.answer_count"), "model.answer_count");
  m.d_attn = as_extent(v_.at("model.d_attn"), "model.d_attn");
  m.d_cls_hidden = as_extent(v_.at("model.d_cls_hidden"), "model.d_cls_hidden");
  m.dropout_classifier = v_.at("model.dropout_classifier").get<double>();
  m.dropout_fc = v_.at("model.dropout_fc").get<double>();
  m.softmax_loss = v_.at("model.softmax_loss").get<bool>();
  m.validate();
  return m;
}

TrainSchedule RunConfig::schedule() const {
  TrainSchedule t;
  t.epochs = as_extent(v_.at("train.epochs"), "train.epochs");
  t.warmup_epochs = as_extent(v_.at("train.warmup_epochs"), "train.warmup_epochs");
  t.lr_start = v_.at("train.lr_start").get<double>();
  t.lr_plateau = v_.at("train.lr_plateau").get<double>();
  t.plateau_until_epoch = as_extent(v_.at("train.plateau_until_epoch"), "train.plateau_until_epoch");
  t.decay = v_.at("train.decay").get<double>();
  t.decay_epochs.clear();
  for (const json& e : v_.at("train.decay_epochs")) {
    t.decay_epochs.push_back(as_extent(e, "train.decay_epochs"));
  }
  t.batch_size = as_extent(v_.at("train.batch_size"), "train.batch_size");
  t.clip_norm = v_.at("train.clip_norm").get<double>();
  t.classifier_only = v_.at("train.classifier_only").get<bool>();
  t.validate();
  return t;
}

DataGenConfig RunConfig::datagen() const {
  DataGenConfig d;
  d.train_examples = as_extent(v_.at("data.train_examples"), "data.train_examples");
  d.val_examples = as_extent(v_.at("data.val_examples"), "data.val_examples");
  d.objects_min = as_extent(v_.at("data.objects_min"), "data.objects_min");
  d.objects_max = as_extent(v_.at("data.objects_max"), "data.objects_max");
  d.noise_sigma = v_.at("data.noise_sigma").get<double>();
  d.annotator_noise = v_.at("data.annotator_noise").get<double>();
  d.answer_min_occurrences =
      as_extent(v_.at("data.answer_min_occurrences"), "data.answer_min_occurrences");
  d.validate();
  return d;
}

uint64_t RunConfig::seed() const {
  return static_cast<uint64_t>(as_extent(v_.at("seed"), "seed"));
}

bool RunConfig::parallel_kernels() const { return v_.at("exec.parallel").get<bool>(); }
bool RunConfig::f32_kernels() const { return v_.at("exec.f32").get<bool>(); }
bool RunConfig::exact_soft_accuracy() const { return v_.at("eval.exact_soft_accuracy").get<bool>(); }
bool RunConfig::pad_batches() const { return v_.at("train.pad_batches").get<bool>(); }

}  // namespace vqacoin
