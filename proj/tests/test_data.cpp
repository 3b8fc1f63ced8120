#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "vqacoin/data.hpp"
#include "vqacoin/error.hpp"
#include "vqacoin/rng.hpp"
#include "vqacoin/tensor.hpp"
#include "vqacoin/textprep.hpp"

using namespace vqacoin;
using namespace vqacoin::data;
namespace fs = std::filesystem;

namespace {

size_t shape_index(const std::string& name) {
  for (size_t i = 0; i < kShapes.size(); ++i)
    if (name == kShapes[i]) return i;
  REQUIRE(false);
  return 0;
}

size_t color_index(const std::string& name) {
  for (size_t i = 0; i < kColors.size(); ++i)
    if (name == kColors[i]) return i;
  REQUIRE(false);
  return 0;
}

/// Recomputes the ground-truth answer for a generated question directly from
/// the scene objects, independently of the generator's own bookkeeping.
std::string brute_force_answer(const SceneSpec& scene, const std::string& question) {
  const std::string kExist = "is there a ";
  const std::string kCount = "how many ";
  const std::string kAttr = "what color is the ";
  if (question.rfind(kExist, 0) == 0) {
    std::string rest = question.substr(kExist.size());
    rest.pop_back();  // '?'
    size_t sp = rest.find(' ');
    size_t color = color_index(rest.substr(0, sp));
    size_t shape = shape_index(rest.substr(sp + 1));
    for (const SceneObject& o : scene.objects)
      if (o.color == color && o.shape == shape) return "yes";
    return "no";
  }
  if (question.rfind(kCount, 0) == 0) {
    std::string rest = question.substr(kCount.size());
    rest = rest.substr(0, rest.find("s are there?"));
    size_t shape = shape_index(rest);
    size_t n = 0;
    for (const SceneObject& o : scene.objects) n += o.shape == shape;
    return std::to_string(n);
  }
  REQUIRE(question.rfind(kAttr, 0) == 0);
  std::string rest = question.substr(kAttr.size());
  rest.pop_back();
  size_t shape = shape_index(rest);
  size_t hits = 0, color = 0;
  for (const SceneObject& o : scene.objects) {
    if (o.shape == shape) {
      ++hits;
      color = o.color;
    }
  }
  REQUIRE(hits == 1);
  return kColors[color];
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::path("/tmp") / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::trunc | std::ios::binary);
  out << body;
}

Dataset tiny_dataset() {
  Dataset ds;
  ds.has_annotations = true;
  Rng rng(88);
  for (long long q = 0; q < 3; ++q) {
    VqaExample ex;
    ex.question_id = 100 + q;
    ex.image_id = 10 + q;
    ex.question = "is there a red circle?";
    ex.category = "yes/no";
    ex.canonical_answer = q == 2 ? "no" : "yes";
    ex.answers.assign(10, ex.canonical_answer);
    ex.answers[7] = q == 2 ? "yes" : "no";
    ex.si_words = {"red", "circle"};
    ex.image_feats = Tensor::zeros({2, 24});
    for (double& v : ex.image_feats.data()) v = rng.uniform(-1, 1);
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace

TEST_CASE("scene generation is deterministic with uniform attributes") {
  SceneSpec a = gen_scene(5, 3, 8);
  SceneSpec b = gen_scene(5, 3, 8);
  REQUIRE(a.objects.size() == b.objects.size());
  for (size_t i = 0; i < a.objects.size(); ++i) {
    CHECK(a.objects[i].shape == b.objects[i].shape);
    CHECK(a.objects[i].color == b.objects[i].color);
    CHECK(a.objects[i].cell == b.objects[i].cell);
  }

  size_t total = 0;
  std::vector<size_t> shape_counts(kShapes.size(), 0);
  std::vector<size_t> color_counts(kColors.size(), 0);
  std::vector<size_t> count_hist(17, 0);
  for (uint64_t seed = 0; seed < 10000; ++seed) {
    SceneSpec s = gen_scene(seed, 3, 8);
    REQUIRE(s.objects.size() >= 3);
    REQUIRE(s.objects.size() <= 8);
    ++count_hist[s.objects.size()];
    std::set<size_t> cells;
    for (const SceneObject& o : s.objects) {
      REQUIRE(o.shape < kShapes.size());
      REQUIRE(o.color < kColors.size());
      REQUIRE(o.cell < 16);
      cells.insert(o.cell);
      ++shape_counts[o.shape];
      ++color_counts[o.color];
      ++total;
    }
    REQUIRE(cells.size() == s.objects.size());
  }
  for (size_t c : shape_counts) {
    double freq = static_cast<double>(c) / static_cast<double>(total);
    CHECK(std::abs(freq - 1.0 / 6.0) < 0.01);
  }
  for (size_t c : color_counts) {
    double freq = static_cast<double>(c) / static_cast<double>(total);
    CHECK(std::abs(freq - 1.0 / 8.0) < 0.01);
  }
  for (size_t n = 3; n <= 8; ++n) {
    double freq = static_cast<double>(count_hist[n]) / 10000.0;
    CHECK(std::abs(freq - 1.0 / 6.0) < 0.02);
  }
}

TEST_CASE("feature rows carry the documented one-hot prefix") {
  SceneSpec s = gen_scene(17, 3, 8);
  Tensor f = scene_to_features(s, 30, 0.0, 9);
  REQUIRE(f.rows() == s.objects.size());
  REQUIRE(f.cols() == 30);
  for (size_t i = 0; i < s.objects.size(); ++i) {
    const SceneObject& o = s.objects[i];
    for (size_t j = 0; j < 6; ++j) CHECK(f.at(i, j) == (j == o.shape ? 1.0 : 0.0));
    for (size_t j = 0; j < 8; ++j) CHECK(f.at(i, 6 + j) == (j == o.color ? 1.0 : 0.0));
    size_t row = o.cell / kGridSide, col = o.cell % kGridSide;
    for (size_t j = 0; j < 4; ++j) CHECK(f.at(i, 14 + j) == (j == row ? 1.0 : 0.0));
    for (size_t j = 0; j < 4; ++j) CHECK(f.at(i, 18 + j) == (j == col ? 1.0 : 0.0));
    // noiseless tail is exactly zero
    for (size_t j = kFeaturePrefix; j < 30; ++j) CHECK(f.at(i, j) == 0.0);
  }
  Tensor noisy1 = scene_to_features(s, 30, 0.2, 9);
  Tensor noisy2 = scene_to_features(s, 30, 0.2, 9);
  for (size_t i = 0; i < noisy1.numel(); ++i) CHECK(noisy1.data()[i] == noisy2.data()[i]);
  bool tail_nonzero = false;
  for (size_t j = kFeaturePrefix; j < 30; ++j) tail_nonzero |= noisy1.at(0, j) != 0.0;
  CHECK(tail_nonzero);
  CHECK_THROWS_AS(scene_to_features(s, kFeaturePrefix - 1, 0.0, 9), Error);
}

TEST_CASE("noiseless annotations match a brute-force scene oracle") {
  textprep::Wordlists lists = textprep::Wordlists::builtin();
  size_t checked = 0;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    SceneSpec scene = gen_scene(seed, 3, 8);
    GenResult res = gen_examples(scene, static_cast<long long>(seed), 0.0, 0.0, 24, lists,
                                 seed ^ 0x5eed);
    for (const VqaExample& ex : res.examples) {
      REQUIRE(ex.answers.size() == 10);
      std::string truth = brute_force_answer(scene, ex.question);
      CHECK(ex.canonical_answer == truth);
      for (const std::string& a : ex.answers) CHECK(a == truth);
      ++checked;
    }
  }
  CHECK(checked >= 400);
}

TEST_CASE("annotator noise only ever flips to plausible alternatives") {
  textprep::Wordlists lists = textprep::Wordlists::builtin();
  size_t flips = 0, total = 0;
  for (uint64_t seed = 0; seed < 150; ++seed) {
    SceneSpec scene = gen_scene(seed, 3, 8);
    GenResult res =
        gen_examples(scene, static_cast<long long>(seed), 0.3, 0.0, 24, lists, seed * 31 + 7);
    for (const VqaExample& ex : res.examples) {
      for (const std::string& a : ex.answers) {
        ++total;
        if (a == ex.canonical_answer) continue;
        ++flips;
        if (ex.category == "yes/no") {
          CHECK((a == "yes" || a == "no"));
        } else if (ex.category == "number") {
          long long truth = std::stoll(ex.canonical_answer);
          long long got = std::stoll(a);
          CHECK(std::llabs(got - truth) == 1);
        } else {
          bool valid = false;
          for (const char* c : kColors) valid |= a == c;
          CHECK(valid);
        }
      }
    }
  }
  double rate = static_cast<double>(flips) / static_cast<double>(total);
  CHECK(rate > 0.2);
  CHECK(rate < 0.4);
}

TEST_CASE("question ids encode the image and the template slot") {
  textprep::Wordlists lists = textprep::Wordlists::builtin();
  SceneSpec scene = gen_scene(3, 3, 8);
  GenResult res = gen_examples(scene, 55, 0.1, 0.1, 24, lists, 99);
  REQUIRE(res.examples.size() >= 2);
  CHECK(res.examples[0].question_id == 55 * 4 + 0);
  CHECK(res.examples[1].question_id == 55 * 4 + 1);
  for (const VqaExample& ex : res.examples) CHECK(ex.image_id == 55);
  CHECK(!res.captions.empty());
}

TEST_CASE("generated corpus is a pure function of config and seed") {
  DataGenConfig cfg;
  cfg.train_examples = 40;
  cfg.val_examples = 15;
  Corpus a = generate_corpus(cfg, 24, 1234);
  Corpus b = generate_corpus(cfg, 24, 1234);
  Corpus c = generate_corpus(cfg, 24, 1235);
  CHECK(a.train.examples.size() == 40);
  CHECK(a.val.examples.size() == 15);
  REQUIRE(a.train.examples.size() == b.train.examples.size());

  fs::path da = fresh_dir("vqacoin_corpus_a");
  fs::path db = fresh_dir("vqacoin_corpus_b");
  fs::path dc = fresh_dir("vqacoin_corpus_c");
  save_split(da.string(), a.train, &a.train_captions);
  save_split(db.string(), b.train, &b.train_captions);
  save_split(dc.string(), c.train, &c.train_captions);
  bool any_file_differs = false;
  for (const char* name : {"questions.json", "annotations.json", "features.json", "si.json",
                           "captions.json"}) {
    CHECK(fnv1a_file((da / name).string()) == fnv1a_file((db / name).string()));
    any_file_differs |=
        fnv1a_file((da / name).string()) != fnv1a_file((dc / name).string());
  }
  CHECK(any_file_differs);

  // val images never collide with train images
  std::set<long long> train_imgs, val_imgs;
  for (const VqaExample& e : a.train.examples) train_imgs.insert(e.image_id);
  for (const VqaExample& e : a.val.examples) val_imgs.insert(e.image_id);
  for (long long id : val_imgs) CHECK(!train_imgs.count(id));
}

TEST_CASE("split save/load round trip preserves every field") {
  DataGenConfig cfg;
  cfg.train_examples = 25;
  cfg.val_examples = 8;
  Corpus c = generate_corpus(cfg, 24, 77);
  fs::path dir = fresh_dir("vqacoin_roundtrip");
  save_split(dir.string(), c.train, &c.train_captions);
  Dataset back = load_split(dir.string());
  CHECK(back.has_annotations);
  CHECK(back.missing_si == 0);
  REQUIRE(back.examples.size() == c.train.examples.size());
  for (size_t i = 0; i < back.examples.size(); ++i) {
    const VqaExample& x = c.train.examples[i];
    const VqaExample& y = back.examples[i];
    CHECK(x.question_id == y.question_id);
    CHECK(x.image_id == y.image_id);
    CHECK(x.question == y.question);
    CHECK(x.si_words == y.si_words);
    CHECK(x.answers == y.answers);
    CHECK(x.canonical_answer == y.canonical_answer);
    CHECK(x.category == y.category);
    REQUIRE(x.image_feats.numel() == y.image_feats.numel());
    for (size_t j = 0; j < x.image_feats.numel(); ++j) {
      CHECK(x.image_feats.data()[j] == y.image_feats.data()[j]);
    }
  }
}

TEST_CASE("binary feature files round trip bit for bit") {
  Dataset ds = tiny_dataset();
  fs::path dir = fresh_dir("vqacoin_binfeat");
  save_split(dir.string(), ds, nullptr, /*binary_features=*/true);
  CHECK(fs::exists(dir / "features.bin"));
  CHECK(!fs::exists(dir / "features.json"));
  Dataset back = load_split(dir.string());
  REQUIRE(back.examples.size() == ds.examples.size());
  for (size_t i = 0; i < back.examples.size(); ++i) {
    const Tensor& x = ds.examples[i].image_feats;
    const Tensor& y = back.examples[i].image_feats;
    REQUIRE(x.rows() == y.rows());
    REQUIRE(x.cols() == y.cols());
    for (size_t j = 0; j < x.numel(); ++j) CHECK(x.data()[j] == y.data()[j]);
  }
}

TEST_CASE("malformed JSON reports the byte offset") {
  Dataset ds = tiny_dataset();
  fs::path dir = fresh_dir("vqacoin_badjson");
  save_split(dir.string(), ds, nullptr);
  write_file(dir / "questions.json", "{\"questions\": [,]}");
  try {
    load_split(dir.string());
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
    CHECK(std::string(e.what()).find("parse error at byte") != std::string::npos);
  }
}

TEST_CASE("questions referencing missing features list the dangling ids") {
  Dataset ds = tiny_dataset();
  fs::path dir = fresh_dir("vqacoin_dangling");
  save_split(dir.string(), ds, nullptr);
  // rewrite features.json keeping only image 10
  Dataset one;
  one.has_annotations = true;
  one.examples.push_back(ds.examples[0]);
  fs::path tmp = fresh_dir("vqacoin_dangling_one");
  save_split(tmp.string(), one, nullptr);
  fs::copy_file(tmp / "features.json", dir / "features.json",
                fs::copy_options::overwrite_existing);
  try {
    load_split(dir.string());
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
    CHECK(std::string(e.what()).find("11") != std::string::npos);
    CHECK(std::string(e.what()).find("12") != std::string::npos);
  }
}

TEST_CASE("splits without annotations load in test mode") {
  Dataset ds = tiny_dataset();
  fs::path dir = fresh_dir("vqacoin_noann");
  save_split(dir.string(), ds, nullptr);
  fs::remove(dir / "annotations.json");
  Dataset back = load_split(dir.string());
  CHECK(!back.has_annotations);
  REQUIRE(back.examples.size() == 3);
  for (const VqaExample& ex : back.examples) {
    CHECK(ex.answers.empty());
    CHECK(ex.canonical_answer.empty());
  }
}

TEST_CASE("missing semantic info is counted, not fatal") {
  Dataset ds = tiny_dataset();
  fs::path dir = fresh_dir("vqacoin_nosi");
  save_split(dir.string(), ds, nullptr);
  write_file(dir / "si.json", R"({"10": ["red", "circle"]})");
  Dataset back = load_split(dir.string());
  CHECK(back.missing_si == 2);
  CHECK(back.examples[0].si_words == std::vector<std::string>{"red", "circle"});
  CHECK(back.examples[1].si_words.empty());
}

TEST_CASE("annotation with the wrong answer count is rejected") {
  Dataset ds = tiny_dataset();
  ds.examples[1].answers.pop_back();  // 9 answers
  fs::path dir = fresh_dir("vqacoin_nine");
  save_split(dir.string(), ds, nullptr);
  try {
    load_split(dir.string());
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
    CHECK(std::string(e.what()).find("expected 10") != std::string::npos);
  }
}

TEST_CASE("duplicate ids are rejected at load time") {
  Dataset ds = tiny_dataset();
  ds.examples[2].question_id = ds.examples[0].question_id;
  fs::path dir = fresh_dir("vqacoin_dupq");
  save_split(dir.string(), ds, nullptr);
  CHECK_THROWS_AS(load_split(dir.string()), Error);

  // a question missing from annotations.json is reported by id
  Dataset ds2 = tiny_dataset();
  fs::path dir2 = fresh_dir("vqacoin_missann");
  save_split(dir2.string(), ds2, nullptr);
  Dataset partial;
  partial.has_annotations = true;
  partial.examples = {ds2.examples[0], ds2.examples[1]};
  fs::path tmp = fresh_dir("vqacoin_missann_tmp");
  save_split(tmp.string(), partial, nullptr);
  fs::copy_file(tmp / "annotations.json", dir2 / "annotations.json",
                fs::copy_options::overwrite_existing);
  try {
    load_split(dir2.string());
    CHECK(false);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("102") != std::string::npos);
  }
}

TEST_CASE("answer normalization strips case, punctuation, and articles") {
  CHECK(normalize_answer("Yes!") == "yes");
  CHECK(normalize_answer("A red Circle") == "red circle");
  CHECK(normalize_answer("the   answer") == "answer");
  CHECK(normalize_answer("an apple") == "apple");
  CHECK(normalize_answer("3,000") == "3 000");
  CHECK(normalize_answer("THE THE the") == "");
  CHECK(normalize_answer("banana") == "banana");
}

TEST_CASE("scaled subsets are nested prefixes with ceil sizing") {
  DataGenConfig cfg;
  cfg.train_examples = 30;
  cfg.val_examples = 5;
  Corpus c = generate_corpus(cfg, 24, 9);
  const std::vector<VqaExample>& all = c.train.examples;

  std::vector<VqaExample> q25 = scale_split(all, 0.25, 5);
  std::vector<VqaExample> q50 = scale_split(all, 0.5, 5);
  std::vector<VqaExample> q100 = scale_split(all, 1.0, 5);
  CHECK(q25.size() == 8);  // ceil(0.25 * 30)
  CHECK(q50.size() == 15);
  CHECK(q100.size() == 30);
  auto ids = [](const std::vector<VqaExample>& v) {
    std::set<long long> s;
    for (const VqaExample& e : v) s.insert(e.question_id);
    return s;
  };
  std::set<long long> s25 = ids(q25), s50 = ids(q50), s100 = ids(q100);
  CHECK(std::includes(s50.begin(), s50.end(), s25.begin(), s25.end()));
  CHECK(std::includes(s100.begin(), s100.end(), s50.begin(), s50.end()));
  // the full fraction is a shuffle, not the identity
  bool reordered = false;
  for (size_t i = 0; i < all.size(); ++i) {
    reordered |= q100[i].question_id != all[i].question_id;
  }
  CHECK(reordered);
  // a different seed picks a different prefix
  CHECK(ids(scale_split(all, 0.25, 6)) != s25);

  CHECK_THROWS_AS(scale_split(all, 0.0, 5), Error);
  CHECK_THROWS_AS(scale_split(all, 1.5, 5), Error);
}

TEST_CASE("file hashing is deterministic and content-sensitive") {
  fs::path dir = fresh_dir("vqacoin_fnv");
  write_file(dir / "a.txt", "the quick brown fox");
  write_file(dir / "b.txt", "the quick brown fox");
  write_file(dir / "c.txt", "the quick brown fix");
  CHECK(fnv1a_file((dir / "a.txt").string()) == fnv1a_file((dir / "b.txt").string()));
  CHECK(fnv1a_file((dir / "a.txt").string()) != fnv1a_file((dir / "c.txt").string()));
  CHECK_THROWS_AS(fnv1a_file((dir / "missing.txt").string()), Error);
}
