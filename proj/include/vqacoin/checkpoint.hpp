#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vqacoin/config.hpp"
#include "vqacoin/model.hpp"
#include "vqacoin/tensor.hpp"

namespace vqacoin::checkpoint {

/// On-disk model snapshot: "VQCK" magic, format version, a JSON header
/// (model config, vocabulary, answer list, tensor manifest, optimizer
/// manifest), then every tensor's raw little-endian doubles in manifest
/// order. Round-trips bit-identically.
struct Checkpoint {
  ModelConfig cfg;
  std::vector<std::string> vocab_tokens;
  std::vector<std::string> answer_tokens;
  std::vector<std::pair<std::string, Tensor>> tensors;

  bool has_optimizer = false;
  size_t step = 0;         // Adamax timestep
  size_t epochs_done = 0;  // completed epochs, for resume
  std::vector<std::pair<std::string, Tensor>> opt_m;
  std::vector<std::pair<std::string, Tensor>> opt_u;
};

void save(const std::string& path, const Checkpoint& ck);
Checkpoint load(const std::string& path);

/// Snapshot of the model's current parameter values (no optimizer state;
/// the trainer fills that in when it wants resumability).
Checkpoint from_model(const model::VqaCoinModel& m);

/// Rebuilds a model from a snapshot: config, vocabulary and answers from
/// the header, parameter values from the payload.
model::VqaCoinModel to_model(const Checkpoint& ck);

/// Field-by-field comparison; a mismatch raises a config error naming the
/// first differing field. Used when resuming, where silently training a
/// different architecture would be worse than stopping.
void check_config_match(const ModelConfig& stored, const ModelConfig& requested);

}  // namespace vqacoin::checkpoint
