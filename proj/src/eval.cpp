#include "vqacoin/eval.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "json.hpp"
#include "vqacoin/error.hpp"

namespace vqacoin::eval {

using nlohmann::json;

double soft_accuracy(const std::string& prediction, const std::vector<std::string>& answers,
                     bool exact_averaging) {
  if (answers.size() != 10)
    throw contract_error("soft_accuracy needs exactly 10 answers, got " +
                         std::to_string(answers.size()));
  std::string pred = data::normalize_answer(prediction);
  std::vector<bool> match(10);
  size_t total = 0;
  for (size_t i = 0; i < 10; ++i) {
    match[i] = data::normalize_answer(answers[i]) == pred;
    total += match[i];
  }
  if (!exact_averaging) return std::min(static_cast<double>(total) / 3.0, 1.0);
  double acc = 0.0;
  for (size_t leave = 0; leave < 10; ++leave) {
    size_t matches = total - (match[leave] ? 1 : 0);
    acc += std::min(static_cast<double>(matches) / 3.0, 1.0);
  }
  return acc / 10.0;
}

Tensor soft_targets(const textprep::AnswerSet& answers,
                    const std::vector<std::string>& human_answers) {
  Tensor t = Tensor::zeros({answers.size()});
  for (const std::string& a : human_answers) {
    long long id = answers.id(data::normalize_answer(a));
    if (id >= 0) t.at(static_cast<size_t>(id)) += 1.0;
  }
  for (double& v : t.data()) v = std::min(v / 3.0, 1.0);
  return t;
}

long long hard_target(const textprep::AnswerSet& answers,
                      const std::vector<std::string>& human_answers) {
  std::vector<size_t> counts(answers.size(), 0);
  for (const std::string& a : human_answers) {
    long long id = answers.id(data::normalize_answer(a));
    if (id >= 0) ++counts[static_cast<size_t>(id)];
  }
  long long best = -1;
  size_t best_count = 0;
  for (size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > best_count) {
      best_count = counts[i];
      best = static_cast<long long>(i);
    }
  }
  return best;
}

model::EncodedExample encode(const model::VqaCoinModel& m, const data::VqaExample& ex,
                             bool pad, size_t pad_image_rows) {
  model::EncodedExample enc;
  enc.question = m.encode_question(ex.question);
  enc.si = m.encode_si(ex.si_words);
  enc.image_feats = ex.image_feats;
  if (!pad) return enc;

  size_t n_q = enc.question.size();
  enc.live_q = Tensor::zeros({m.cfg.n_q_max});
  for (size_t i = 0; i < n_q; ++i) enc.live_q.at(i) = 1.0;
  enc.question.resize(m.cfg.n_q_max, textprep::Vocabulary::kPadId);

  if (!enc.si.empty()) {
    size_t n_si = enc.si.size();
    enc.live_si = Tensor::zeros({m.cfg.si_max});
    for (size_t i = 0; i < n_si; ++i) enc.live_si.at(i) = 1.0;
    enc.si.resize(m.cfg.si_max, textprep::Vocabulary::kPadId);
  }

  size_t rows = ex.image_feats.rows();
  if (rows > pad_image_rows)
    throw dimension_error("image has " + std::to_string(rows) + " objects, pad target is " +
                          std::to_string(pad_image_rows));
  enc.live_image = Tensor::zeros({pad_image_rows});
  Tensor padded = Tensor::zeros({pad_image_rows, ex.image_feats.cols()});
  for (size_t r = 0; r < rows; ++r) {
    enc.live_image.at(r) = 1.0;
    for (size_t c = 0; c < ex.image_feats.cols(); ++c)
      padded.at(r, c) = ex.image_feats.at(r, c);
  }
  enc.image_feats = std::move(padded);
  return enc;
}

EvalReport evaluate(const model::VqaCoinModel& m, const std::vector<data::VqaExample>& examples,
                    bool exact_averaging, std::vector<Prediction>* out_preds) {
  if (examples.empty()) throw contract_error("evaluate: empty example list");
  Rng rng(0);  // never drawn from: eval mode has no dropout
  std::map<std::string, std::pair<size_t, double>> by_category;
  double total = 0.0;
  for (const data::VqaExample& ex : examples) {
    model::ModelOutputs out = m.forward(encode(m, ex, /*pad=*/false), /*training=*/false, rng);
    size_t cls = model::argmax_lowest(out.logits->value.data());
    const std::string& pred = m.answers.id_to_answer[cls];
    if (out_preds) out_preds->push_back({ex.question_id, pred});
    double acc = soft_accuracy(pred, ex.answers, exact_averaging);
    total += acc;
    auto& slot = by_category[ex.category];
    slot.first += 1;
    slot.second += acc;
  }
  EvalReport report;
  report.examples = examples.size();
  report.overall = total / static_cast<double>(examples.size());
  for (const auto& [cat, slot] : by_category)
    report.categories.push_back({cat, slot.first, slot.second / static_cast<double>(slot.first)});
  return report;
}

void export_results(const std::string& path, std::vector<Prediction> preds) {
  std::sort(preds.begin(), preds.end(),
            [](const Prediction& a, const Prediction& b) { return a.question_id < b.question_id; });
  for (size_t i = 1; i < preds.size(); ++i)
    if (preds[i].question_id == preds[i - 1].question_id)
      throw data_error("duplicate question_id in predictions: " +
                       std::to_string(preds[i].question_id));
  json out = json::array();
  for (const Prediction& p : preds)
    out.push_back({{"question_id", p.question_id}, {"answer", p.answer}});
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot write " + path);
  f << out.dump(2) << "\n";
  if (!f) throw io_error("write failed for " + path);
}

namespace {

Tensor renormalized(const Tensor& t) {
  double sum = 0.0;
  for (double v : t.data()) sum += v;
  Tensor out = t;
  if (sum > 0.0)
    for (double& v : out.data()) v /= sum;
  return out;
}

}  // namespace

std::vector<attention::AttentionMap> dump_attention(const model::VqaCoinModel& m,
                                                    const data::VqaExample& ex) {
  Rng rng(0);
  model::EncodedExample enc = encode(m, ex, /*pad=*/false);
  model::ModelOutputs out = m.forward(enc, /*training=*/false, rng);

  std::vector<std::string> q_labels;
  for (size_t id : enc.question) q_labels.push_back(m.vocab.id_to_token[id]);
  std::vector<std::string> obj_labels;
  for (size_t r = 0; r < enc.image_feats.rows(); ++r)
    obj_labels.push_back("object" + std::to_string(r));
  std::vector<std::string> si_labels;
  for (size_t id : enc.si) si_labels.push_back(m.vocab.id_to_token[id]);

  const Tensor& sw = out.self_weights->value;
  Tensor self_row = Tensor::from_data({size_t{1}, sw.numel()},
                                      {sw.data().begin(), sw.data().end()});
  std::vector<attention::AttentionMap> maps;
  maps.push_back({renormalized(self_row), {"question self-attention"}, q_labels});
  for (size_t g = 0; g < out.image_maps.size(); ++g)
    maps.push_back({renormalized(out.image_maps[g]->value), obj_labels, q_labels});
  if (out.si_used) maps.push_back({renormalized(out.si_map->value), si_labels, q_labels});
  return maps;
}

}  // namespace vqacoin::eval
