#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace vqacoin {

/// Architecture hyperparameters. Two profiles: `desk` (small, fast, the
/// default everywhere) and `full_size` (dimensions for the structural
/// parity check).
struct ModelConfig {
  size_t d_image = 64;        // per-object feature width
  size_t d_q_large = 64;      // wide question encoder
  size_t d_q_small = 32;      // narrow question encoder; must equal the SI encoder width
  size_t embed_dim = 32;      // word embedding width
  size_t n_q_max = 14;        // question length cap
  size_t si_max = 40;         // semantic-info length cap
  size_t glimpses_image = 2;  // image-branch glimpse count
  size_t glimpses_si = 1;     // SI branch is single-glimpse
  size_t answer_count = 0;    // 0: taken from the corpus answer set
  size_t d_attn = 32;         // low-rank width of bilinear scoring
  size_t d_cls_hidden = 128;  // classifier hidden width
  double dropout_classifier = 0.5;
  double dropout_fc = 0.2;
  bool softmax_loss = false;  // plain cross-entropy on the canonical answer

  static ModelConfig desk() { return ModelConfig{}; }
  static ModelConfig full_size();

  void validate() const;
};

/// Learning-rate schedule and loop hyperparameters: 4 warmup epochs rising
/// linearly 0.05e-3 -> 0.2e-3, plateau through epoch 10, then a 0.25
/// multiplier at each epoch in decay_epochs.
struct TrainSchedule {
  size_t epochs = 18;
  size_t warmup_epochs = 4;
  double lr_start = 0.05e-3;
  double lr_plateau = 0.2e-3;
  size_t plateau_until_epoch = 10;
  double decay = 0.25;
  std::vector<size_t> decay_epochs = {12, 14, 15, 16, 17, 18};
  size_t batch_size = 16;  // full-size preset: 180
  double clip_norm = 0.25;
  bool classifier_only = false;  // restrict optimizer updates to the classifier

  void validate() const;
};

/// Synthetic corpus knobs.
struct DataGenConfig {
  size_t train_examples = 5000;
  size_t val_examples = 1000;
  size_t objects_min = 3;
  size_t objects_max = 8;
  double noise_sigma = 0.1;
  double annotator_noise = 0.1;
  size_t answer_min_occurrences = 9;

  void validate() const;
};

/// Flat dotted-key configuration: every knob of the run in one JSON object
/// ("model.d_image": 64, "train.epochs": 18, ...). Construction starts from
/// the full default set; files and --set overrides may only touch known
/// keys, so typos fail loudly before any work starts. `resolved()` is the
/// complete effective object, echoed into run manifests.
class RunConfig {
 public:
  static RunConfig defaults();
  static RunConfig from_file(const std::string& path);

  /// Overlays one "key=value" pair; the value is parsed as JSON, or kept as
  /// a string when it does not parse.
  void apply_override(const std::string& assignment);

  ModelConfig model() const;
  TrainSchedule schedule() const;
  DataGenConfig datagen() const;

  uint64_t seed() const;
  bool parallel_kernels() const;
  bool f32_kernels() const;
  bool exact_soft_accuracy() const;
  bool pad_batches() const;

  const nlohmann::json& resolved() const { return v_; }

 private:
  void set_checked(const std::string& key, nlohmann::json value, const std::string& origin);
  nlohmann::json v_;
};

}  // namespace vqacoin
