#pragma once

#include <string>
#include <vector>

#include "vqacoin/attention.hpp"
#include "vqacoin/data.hpp"
#include "vqacoin/model.hpp"
#include "vqacoin/tensor.hpp"
#include "vqacoin/textprep.hpp"

namespace vqacoin::eval {

/// VQA consensus accuracy of one prediction against the 10 human answers:
/// min(#matching answers / 3, 1). With exact_averaging the score is instead
/// averaged over the ten leave-one-annotator-out subsets, which is the
/// metric's full definition; the min form is its common shortcut. Both
/// normalize strings before comparing. Fewer or more than 10 answers is a
/// contract violation.
double soft_accuracy(const std::string& prediction, const std::vector<std::string>& answers,
                     bool exact_averaging = false);

/// Per-class soft targets for training: min(count/3, 1) over the 10 human
/// answers, zero for out-of-set answers.
Tensor soft_targets(const textprep::AnswerSet& answers,
                    const std::vector<std::string>& human_answers);

/// Most frequent in-set human answer (ties to the lowest class id), or -1
/// when no human answer is a retained class.
long long hard_target(const textprep::AnswerSet& answers,
                      const std::vector<std::string>& human_answers);

/// Pads question/SI to their caps and the image to pad_image_rows rows,
/// with live masks; or leaves everything unpadded. Empty SI stays empty
/// either way (an all-padding sequence would have nothing to attend to).
model::EncodedExample encode(const model::VqaCoinModel& m, const data::VqaExample& ex,
                             bool pad, size_t pad_image_rows = 16);

struct CategoryAccuracy {
  std::string category;
  size_t count = 0;
  double accuracy = 0.0;
};

struct EvalReport {
  double overall = 0.0;
  size_t examples = 0;
  std::vector<CategoryAccuracy> categories;  // sorted by category name
};

struct Prediction {
  long long question_id = 0;
  std::string answer;
};

/// Scores the model over a split. The split must carry annotations (10
/// answers per question) and be non-empty. Overall accuracy equals the
/// count-weighted mean of the per-category accuracies by construction.
EvalReport evaluate(const model::VqaCoinModel& m, const std::vector<data::VqaExample>& examples,
                    bool exact_averaging = false, std::vector<Prediction>* out_preds = nullptr);

/// Writes predictions as JSON [{"question_id": ..., "answer": ...}, ...],
/// sorted by question_id; a duplicate question_id is an error.
void export_results(const std::string& path, std::vector<Prediction> preds);

/// Runs one example in eval mode and returns every attention map with
/// human-readable labels, each renormalized to sum to 1.
std::vector<attention::AttentionMap> dump_attention(const model::VqaCoinModel& m,
                                                    const data::VqaExample& ex);

}  // namespace vqacoin::eval
