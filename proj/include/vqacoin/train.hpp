#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqacoin/checkpoint.hpp"
#include "vqacoin/config.hpp"
#include "vqacoin/data.hpp"
#include "vqacoin/layers.hpp"
#include "vqacoin/model.hpp"
#include "vqacoin/tensor.hpp"

namespace vqacoin::train {

/// Learning rate for 1-based epoch: linear warmup to the plateau value,
/// hold, then one multiplicative decay per listed epoch at or before the
/// current one (applied in ascending order, so the value is bit-stable).
double lr_at_epoch(const TrainSchedule& s, size_t epoch);

/// Sum-of-squares gradient norm across all parameters; grads are scaled so
/// the norm is at most max_norm. Returns the pre-clip norm. A non-finite
/// gradient aborts, naming the parameter.
double clip_global_norm(const std::vector<layers::NamedParam>& params, double max_norm);

/// Adamax: m <- b1*m + (1-b1)*g, u <- max(b2*u, |g|),
/// theta <- theta - lr/(1-b1^t) * m/(u+eps). The infinity-norm variant of
/// Adam; step sizes never blow up when a gradient spikes.
struct Adamax {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  size_t step = 0;
  std::vector<layers::NamedParam> params;
  std::vector<Tensor> m;
  std::vector<Tensor> u;

  explicit Adamax(std::vector<layers::NamedParam> params_);

  /// One update from the gradients currently on the parameters. Parameters
  /// whose gradient was never touched this step count as zero-gradient.
  void apply(double lr);
};

struct EpochMetrics {
  size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double wall_time = 0.0;  // seconds
};

struct TrainOptions {
  uint64_t seed = 42;
  bool pad_batches = false;
  bool exact_soft_accuracy = false;
  std::string metrics_path;     // JSONL, one line per epoch; empty: no file
  std::string best_path;        // best-validation checkpoint; empty: no file
  std::string last_path;        // last-epoch checkpoint with optimizer state
  const checkpoint::Checkpoint* resume = nullptr;  // must carry optimizer state
  bool quiet = false;           // suppress per-epoch stderr lines
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  double best_val_accuracy = 0.0;
  size_t best_epoch = 0;  // 0 when validation never ran
};

/// Full training run: deterministic per-epoch shuffling, per-example
/// dropout streams (so resuming mid-run reproduces the uninterrupted run
/// bit for bit), global-norm clipping, Adamax with the schedule above,
/// validation after every epoch.
TrainResult train_loop(model::VqaCoinModel& m, const TrainSchedule& sched,
                       const std::vector<data::VqaExample>& train_set,
                       const std::vector<data::VqaExample>& val_set, const TrainOptions& opt);

struct ScalePoint {
  double fraction = 0.0;
  std::vector<double> accuracies;  // one per seed, best validation accuracy
  double mean = 0.0;
};

struct ScalingReport {
  std::vector<uint64_t> seeds;
  std::vector<ScalePoint> points;
};

/// Trains one model per (fraction, seed) on nested shuffled subsets of the
/// training split. Vocabulary and answer set are rebuilt from each subset,
/// the way a real reduced-data run would see them.
ScalingReport scaling_experiment(const ModelConfig& mcfg, const TrainSchedule& sched,
                                 const std::vector<data::VqaExample>& train_set,
                                 const std::vector<data::VqaExample>& val_set,
                                 const std::vector<double>& fractions,
                                 const std::vector<uint64_t>& seeds, uint64_t data_seed,
                                 size_t answer_min_occurrences, bool quiet = false);

/// Vocabulary from question + SI tokens, answer classes from normalized
/// canonical answers. The shared prep step before any training run.
void build_vocab_and_answers(const std::vector<data::VqaExample>& train_set,
                             size_t answer_min_occurrences, textprep::Vocabulary& vocab,
                             textprep::AnswerSet& answers);

}  // namespace vqacoin::train
