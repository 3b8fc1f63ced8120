#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "vqacoin/data.hpp"
#include "vqacoin/error.hpp"
#include "vqacoin/eval.hpp"
#include "vqacoin/model.hpp"
#include "vqacoin/rng.hpp"
#include "vqacoin/tensor.hpp"
#include "vqacoin/textprep.hpp"
#include "vqacoin/train.hpp"

using namespace vqacoin;
using namespace vqacoin::eval;

namespace {

std::vector<std::string> answers_with(size_t yes_count, const std::string& hit = "yes",
                                      const std::string& miss = "no") {
  std::vector<std::string> out(10, miss);
  for (size_t i = 0; i < yes_count; ++i) out[i] = hit;
  return out;
}

struct Fixture {
  std::vector<data::VqaExample> train_set;
  std::vector<data::VqaExample> val_set;
  model::VqaCoinModel m;
};

Fixture make_fixture(uint64_t seed = 61) {
  DataGenConfig cfg;
  cfg.train_examples = 20;
  cfg.val_examples = 10;
  cfg.noise_sigma = 0.0;
  cfg.annotator_noise = 0.0;
  cfg.answer_min_occurrences = 1;
  data::Corpus corpus = data::generate_corpus(cfg, 24, seed);
  textprep::Vocabulary vocab;
  textprep::AnswerSet answers;
  train::build_vocab_and_answers(corpus.train.examples, 1, vocab, answers);
  ModelConfig mc = ModelConfig::desk();
  mc.d_image = 24;
  mc.d_q_large = 16;
  mc.d_q_small = 8;
  mc.embed_dim = 8;
  mc.d_attn = 8;
  mc.d_cls_hidden = 24;
  mc.answer_count = answers.size();
  return Fixture{std::move(corpus.train.examples), std::move(corpus.val.examples),
                 model::VqaCoinModel::init(mc, std::move(vocab), std::move(answers), seed)};
}

}  // namespace

TEST_CASE("soft accuracy follows the min(matches/3, 1) rule") {
  CHECK(soft_accuracy("yes", answers_with(0)) == 0.0);
  CHECK(soft_accuracy("yes", answers_with(1)) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(soft_accuracy("yes", answers_with(2)) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(soft_accuracy("yes", answers_with(3)) == 1.0);
  CHECK(soft_accuracy("yes", answers_with(10)) == 1.0);
  CHECK_THROWS_AS(soft_accuracy("yes", std::vector<std::string>(9, "yes")), Error);
  CHECK_THROWS_AS(soft_accuracy("yes", std::vector<std::string>(11, "yes")), Error);
}

TEST_CASE("exact averaging scores each leave-one-annotator-out subset") {
  // 3 matches: dropping a matching answer leaves 2 (score 2/3), dropping a
  // miss leaves 3 (score 1): mean = (3*(2/3) + 7*1)/10 = 0.9
  CHECK(soft_accuracy("yes", answers_with(3), true) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(soft_accuracy("yes", answers_with(3), false) == 1.0);
  // 1 match: (1*0 + 9*(1/3))/10 = 0.3
  CHECK(soft_accuracy("yes", answers_with(1), true) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(soft_accuracy("yes", answers_with(0), true) == 0.0);
  CHECK(soft_accuracy("yes", answers_with(10), true) == 1.0);
}

TEST_CASE("soft accuracy normalizes both sides before matching") {
  std::vector<std::string> noisy(10, "No");
  for (size_t i = 0; i < 4; ++i) noisy[i] = "Yes!";
  CHECK(soft_accuracy("yes", noisy) == 1.0);
  CHECK(soft_accuracy("YES", noisy) == 1.0);
  CHECK(soft_accuracy("the yes", noisy) == 1.0);
}

TEST_CASE("soft accuracy is invariant under annotator permutation") {
  Rng rng(67);
  std::vector<std::string> answers = {"yes", "no", "yes", "two", "yes",
                                      "no",  "no", "two", "yes", "no"};
  double base_plain = soft_accuracy("yes", answers);
  double base_exact = soft_accuracy("yes", answers, true);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<size_t> perm = rng.permutation(10);
    std::vector<std::string> shuffled(10);
    for (size_t i = 0; i < 10; ++i) shuffled[i] = answers[perm[i]];
    CHECK(soft_accuracy("yes", shuffled) == base_plain);
    CHECK(soft_accuracy("yes", shuffled, true) == doctest::Approx(base_exact).epsilon(1e-15));
  }
}

TEST_CASE("soft targets cap at one and ignore out-of-set answers") {
  textprep::AnswerSet as = textprep::AnswerSet::from_answers({"yes", "no", "two"});
  std::vector<std::string> human = {"yes", "yes", "yes", "yes", "no",
                                    "no",  "two", "red", "red", "red"};
  Tensor t = soft_targets(as, human);
  REQUIRE(t.numel() == 3);
  CHECK(t.at(0) == 1.0);  // 4 matches, capped
  CHECK(t.at(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(t.at(2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("hard target picks the majority with ties to the lowest id") {
  textprep::AnswerSet as = textprep::AnswerSet::from_answers({"yes", "no", "two"});
  std::vector<std::string> human = {"no", "no", "yes", "yes", "red",
                                    "red", "red", "red", "red", "red"};
  // yes and no tie at 2; "yes" has the lower class id
  CHECK(hard_target(as, human) == 0);
  CHECK(hard_target(as, std::vector<std::string>(10, "red")) == -1);
  CHECK(hard_target(as, std::vector<std::string>(10, "two")) == 2);
}

TEST_CASE("padded and unpadded encodings produce identical logits") {
  Fixture f = make_fixture();
  Rng rng(1);
  for (size_t i = 0; i < std::min<size_t>(f.val_set.size(), 6); ++i) {
    const data::VqaExample& ex = f.val_set[i];
    model::EncodedExample plain = encode(f.m, ex, /*pad=*/false);
    model::EncodedExample padded = encode(f.m, ex, /*pad=*/true);
    CHECK(padded.question.size() == f.m.cfg.n_q_max);
    CHECK(padded.image_feats.rows() == 16);
    CHECK(padded.live_q.defined());
    CHECK(padded.live_image.defined());
    if (!ex.si_words.empty()) {
      CHECK(padded.si.size() == f.m.cfg.si_max);
      CHECK(padded.live_si.defined());
    }
    model::ModelOutputs a = f.m.forward(plain, false, rng);
    model::ModelOutputs b = f.m.forward(padded, false, rng);
    REQUIRE(a.logits->value.numel() == b.logits->value.numel());
    for (size_t j = 0; j < a.logits->value.numel(); ++j) {
      CHECK(std::abs(a.logits->value.data()[j] - b.logits->value.data()[j]) <= 1e-12);
    }
  }
}

TEST_CASE("encode rejects images larger than the padded shape") {
  Fixture f = make_fixture();
  data::VqaExample ex = f.val_set[0];
  ex.image_feats = Tensor::zeros({17, f.m.cfg.d_image});
  CHECK_THROWS_AS(encode(f.m, ex, true, 16), Error);
}

TEST_CASE("evaluate ties overall accuracy to the category breakdown") {
  Fixture f = make_fixture();
  std::vector<Prediction> preds;
  EvalReport rep = evaluate(f.m, f.val_set, false, &preds);
  CHECK(rep.examples == f.val_set.size());
  CHECK(preds.size() == f.val_set.size());
  REQUIRE(!rep.categories.empty());
  CHECK(std::is_sorted(rep.categories.begin(), rep.categories.end(),
                       [](const CategoryAccuracy& a, const CategoryAccuracy& b) {
                         return a.category < b.category;
                       }));
  double weighted = 0.0;
  size_t counted = 0;
  for (const CategoryAccuracy& c : rep.categories) {
    weighted += c.accuracy * static_cast<double>(c.count);
    counted += c.count;
  }
  CHECK(counted == rep.examples);
  CHECK(std::abs(weighted / static_cast<double>(counted) - rep.overall) <= 1e-9);

  CHECK_THROWS_AS(evaluate(f.m, {}), Error);
  std::vector<data::VqaExample> unannotated = f.val_set;
  unannotated[0].answers.clear();
  CHECK_THROWS_AS(evaluate(f.m, unannotated), Error);
}

TEST_CASE("prediction export is sorted, unique, and round-trips") {
  std::string path = "/tmp/vqacoin_export_test.json";
  export_results(path, {{30, "no"}, {10, "yes"}, {20, "two"}});
  std::ifstream in(path);
  nlohmann::json j = nlohmann::json::parse(in);
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 3);
  CHECK(j[0].at("question_id").get<long long>() == 10);
  CHECK(j[0].at("answer").get<std::string>() == "yes");
  CHECK(j[1].at("question_id").get<long long>() == 20);
  CHECK(j[2].at("question_id").get<long long>() == 30);
  std::remove(path.c_str());

  CHECK_THROWS_AS(export_results(path, {{5, "yes"}, {5, "no"}}), Error);
}

TEST_CASE("attention dump carries labels and unit mass") {
  Fixture f = make_fixture();
  const data::VqaExample* with_si = nullptr;
  for (const auto& ex : f.val_set) {
    if (!ex.si_words.empty()) {
      with_si = &ex;
      break;
    }
  }
  REQUIRE(with_si != nullptr);
  std::vector<attention::AttentionMap> maps = dump_attention(f.m, *with_si);
  // self-attention + image glimpses + SI map
  REQUIRE(maps.size() == 1 + f.m.cfg.glimpses_image + 1);

  std::vector<std::string> qtok = textprep::tokenize_question(with_si->question, f.m.cfg.n_q_max);
  const attention::AttentionMap& self_map = maps[0];
  CHECK(self_map.weights.rows() == 1);
  CHECK(self_map.col_labels == qtok);
  const attention::AttentionMap& img0 = maps[1];
  CHECK(img0.row_labels.size() == with_si->image_feats.rows());
  CHECK(img0.row_labels[0] == "object0");
  CHECK(img0.col_labels == qtok);
  const attention::AttentionMap& si_map = maps.back();
  CHECK(si_map.row_labels.size() == with_si->si_words.size());
  CHECK(si_map.col_labels == qtok);

  for (const attention::AttentionMap& m : maps) {
    double mass = 0.0;
    for (double v : m.weights.data()) {
      CHECK(v >= 0.0);
      mass += v;
    }
    CHECK(std::abs(mass - 1.0) <= 1e-6);
  }
}
