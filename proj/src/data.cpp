#include "vqacoin/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "vqacoin/error.hpp"
#include "vqacoin/rng.hpp"

namespace vqacoin::data {

using nlohmann::json;

namespace {

// Substream tags so every draw is keyed by purpose, not call order.
constexpr uint64_t kTagTrain = 0x11;
constexpr uint64_t kTagVal = 0x12;
constexpr uint64_t kTagScale = 0x21;
constexpr uint64_t kSubScene = 0;
constexpr uint64_t kSubExamples = 1;

constexpr long long kValImageOffset = 1'000'000;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool file_exists(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return static_cast<bool>(in);
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw data_error(origin + ": parse error at byte " + std::to_string(e.byte) + ": " +
                     e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out << text;
  if (!out) throw io_error("write failed for " + path);
}

std::string list_ids(const std::vector<long long>& ids) {
  std::string s;
  size_t shown = std::min<size_t>(ids.size(), 20);
  for (size_t i = 0; i < shown; ++i) {
    if (i) s += ", ";
    s += std::to_string(ids[i]);
  }
  if (ids.size() > shown) s += ", ... (" + std::to_string(ids.size()) + " total)";
  return s;
}

}  // namespace

SceneSpec gen_scene(uint64_t seed, size_t count_min, size_t count_max) {
  if (count_min < 1 || count_max > kGridSide * kGridSide || count_min > count_max)
    throw config_error("scene object count range must sit inside [1, 16]");
  SceneSpec scene;
  scene.seed = seed;
  Rng rng(seed);
  size_t count = static_cast<size_t>(
      rng.uniform_int(static_cast<int64_t>(count_min), static_cast<int64_t>(count_max)));
  std::vector<size_t> cells = rng.permutation(kGridSide * kGridSide);
  scene.objects.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    SceneObject obj;
    obj.shape = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(kShapes.size()) - 1));
    obj.color = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(kColors.size()) - 1));
    obj.cell = cells[i];
    scene.objects.push_back(obj);
  }
  return scene;
}

Tensor scene_to_features(const SceneSpec& scene, size_t d_image, double noise_sigma,
                         uint64_t seed) {
  if (d_image < kFeaturePrefix)
    throw config_error("d_image must be at least " + std::to_string(kFeaturePrefix) +
                       " to hold the shape/color/position one-hots, got " +
                       std::to_string(d_image));
  if (scene.objects.empty()) throw contract_error("scene_to_features: scene has no objects");
  Tensor feats = Tensor::zeros({scene.objects.size(), d_image});
  Rng rng(seed);
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& obj = scene.objects[i];
    feats.at(i, obj.shape) = 1.0;
    feats.at(i, 6 + obj.color) = 1.0;
    feats.at(i, 14 + obj.cell / kGridSide) = 1.0;
    feats.at(i, 18 + obj.cell % kGridSide) = 1.0;
    for (size_t j = kFeaturePrefix; j < d_image; ++j)
      feats.at(i, j) = noise_sigma == 0.0 ? 0.0 : rng.normal(0.0, noise_sigma);
  }
  return feats;
}

std::string normalize_answer(const std::string& answer) {
  std::string spaced;
  spaced.reserve(answer.size());
  for (unsigned char c : answer) {
    if (std::isalnum(c) || c >= 0x80)
      spaced.push_back(static_cast<char>(std::tolower(c)));
    else
      spaced.push_back(' ');
  }
  std::istringstream ss(spaced);
  std::string tok, out;
  while (ss >> tok) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

GenResult gen_examples(const SceneSpec& scene, long long image_id, double annotator_noise,
                       double noise_sigma, size_t d_image, const textprep::Wordlists& lists,
                       uint64_t seed) {
  GenResult res;
  Rng rng(seed);
  Tensor feats =
      scene_to_features(scene, d_image, noise_sigma, Rng::derive_seed(seed, {0xfea7u}));

  // Captions: one sentence per object, with injected near-duplicates and
  // exact duplicates so the dedup stage has real work.
  for (const SceneObject& obj : scene.objects) {
    std::string color = kColors[obj.color];
    std::string shape = kShapes[obj.shape];
    std::string base = "there is a " + color + " " + shape;
    res.captions.push_back(base);
    if (rng.uniform01() < 0.3) res.captions.push_back("there is the " + color + " " + shape);
    if (rng.uniform01() < 0.2) res.captions.push_back(base);
  }
  std::vector<std::string> si = textprep::make_semantic_info(res.captions, lists);

  auto count_shape = [&](size_t shape) {
    size_t n = 0;
    for (const SceneObject& o : scene.objects)
      if (o.shape == shape) ++n;
    return n;
  };
  auto has_pair = [&](size_t color, size_t shape) {
    for (const SceneObject& o : scene.objects)
      if (o.color == color && o.shape == shape) return true;
    return false;
  };

  auto annotate = [&](VqaExample& ex, const std::string& truth,
                      const std::vector<std::string>& plausible) {
    ex.canonical_answer = truth;
    ex.answers.reserve(10);
    for (int i = 0; i < 10; ++i) {
      if (annotator_noise > 0.0 && rng.uniform01() < annotator_noise && !plausible.empty()) {
        size_t pick = static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(plausible.size()) - 1));
        ex.answers.push_back(plausible[pick]);
      } else {
        ex.answers.push_back(truth);
      }
    }
  };
  auto base_example = [&]() {
    VqaExample ex;
    ex.image_id = image_id;
    ex.image_feats = feats;
    ex.si_words = si;
    return ex;
  };

  {  // Existence: half the draws name a present object, half are random.
    VqaExample ex = base_example();
    ex.question_id = image_id * 4 + 0;
    ex.category = "yes/no";
    size_t color, shape;
    if (rng.uniform01() < 0.5) {
      const SceneObject& o = scene.objects[static_cast<size_t>(
          rng.uniform_int(0, static_cast<int64_t>(scene.objects.size()) - 1))];
      color = o.color;
      shape = o.shape;
    } else {
      color = static_cast<size_t>(rng.uniform_int(0, 7));
      shape = static_cast<size_t>(rng.uniform_int(0, 5));
    }
    ex.question = std::string("is there a ") + kColors[color] + " " + kShapes[shape] + "?";
    bool yes = has_pair(color, shape);
    annotate(ex, yes ? "yes" : "no", {yes ? "no" : "yes"});
    res.examples.push_back(std::move(ex));
  }

  {  // Counting: usually a present shape, sometimes any shape (count 0 legal).
    VqaExample ex = base_example();
    ex.question_id = image_id * 4 + 1;
    ex.category = "number";
    size_t shape;
    if (rng.uniform01() < 0.7) {
      shape = scene.objects[static_cast<size_t>(rng.uniform_int(
                                0, static_cast<int64_t>(scene.objects.size()) - 1))]
                  .shape;
    } else {
      shape = static_cast<size_t>(rng.uniform_int(0, 5));
    }
    size_t n = count_shape(shape);
    ex.question = std::string("how many ") + kShapes[shape] + "s are there?";
    std::vector<std::string> near;
    if (n > 0) near.push_back(std::to_string(n - 1));
    near.push_back(std::to_string(n + 1));
    annotate(ex, std::to_string(n), near);
    res.examples.push_back(std::move(ex));
  }

  {  // Attribute: only when some shape occurs exactly once, so the color is
     // unambiguous; otherwise the template is skipped for this scene.
    std::vector<size_t> unique_shapes;
    for (size_t s = 0; s < kShapes.size(); ++s)
      if (count_shape(s) == 1) unique_shapes.push_back(s);
    if (!unique_shapes.empty()) {
      VqaExample ex = base_example();
      ex.question_id = image_id * 4 + 2;
      ex.category = "other";
      size_t shape = unique_shapes[static_cast<size_t>(
          rng.uniform_int(0, static_cast<int64_t>(unique_shapes.size()) - 1))];
      size_t color = 0;
      for (const SceneObject& o : scene.objects)
        if (o.shape == shape) color = o.color;
      ex.question = std::string("what color is the ") + kShapes[shape] + "?";
      std::vector<std::string> others;
      for (size_t c = 0; c < kColors.size(); ++c)
        if (c != color) others.push_back(kColors[c]);
      annotate(ex, kColors[color], others);
      res.examples.push_back(std::move(ex));
    }
  }
  return res;
}

namespace {

void fill_split(Dataset& ds,
                std::vector<std::pair<long long, std::vector<std::string>>>& captions,
                size_t target, long long image_offset, uint64_t tag, const DataGenConfig& cfg,
                size_t d_image, uint64_t seed, const textprep::Wordlists& lists) {
  ds.has_annotations = true;
  long long image = image_offset;
  while (ds.examples.size() < target) {
    uint64_t idx = static_cast<uint64_t>(image);
    SceneSpec scene = gen_scene(Rng::derive_seed(seed, {tag, idx, kSubScene}), cfg.objects_min,
                                cfg.objects_max);
    GenResult gr = gen_examples(scene, image, cfg.annotator_noise, cfg.noise_sigma, d_image,
                                lists, Rng::derive_seed(seed, {tag, idx, kSubExamples}));
    for (VqaExample& ex : gr.examples)
      if (ds.examples.size() < target) ds.examples.push_back(std::move(ex));
    captions.emplace_back(image, std::move(gr.captions));
    ++image;
  }
}

}  // namespace

Corpus generate_corpus(const DataGenConfig& cfg, size_t d_image, uint64_t seed) {
  cfg.validate();
  textprep::Wordlists lists = textprep::Wordlists::builtin();
  Corpus corpus;
  fill_split(corpus.train, corpus.train_captions, cfg.train_examples, 0, kTagTrain, cfg,
             d_image, seed, lists);
  fill_split(corpus.val, corpus.val_captions, cfg.val_examples, kValImageOffset, kTagVal, cfg,
             d_image, seed, lists);
  return corpus;
}

namespace {

constexpr char kFeatureMagic[4] = {'V', 'Q', 'F', 'B'};

void write_features_bin(const std::string& path,
                        const std::vector<std::pair<long long, const Tensor*>>& feats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out.write(kFeatureMagic, 4);
  uint32_t version = 1;
  uint64_t count = feats.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  for (const auto& [id, t] : feats) {
    int64_t id64 = id;
    uint32_t rows = static_cast<uint32_t>(t->rows());
    uint32_t cols = static_cast<uint32_t>(t->cols());
    out.write(reinterpret_cast<const char*>(&id64), sizeof id64);
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    out.write(reinterpret_cast<const char*>(t->data().data()),
              static_cast<std::streamsize>(t->numel() * sizeof(double)));
  }
  if (!out) throw io_error("write failed for " + path);
}

std::unordered_map<long long, Tensor> read_features_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kFeatureMagic, 4) != 0)
    throw data_error(path + ": not a feature file (bad magic)");
  uint32_t version = 0;
  uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || version != 1)
    throw data_error(path + ": unsupported feature file version " + std::to_string(version));
  std::unordered_map<long long, Tensor> feats;
  for (uint64_t i = 0; i < count; ++i) {
    int64_t id = 0;
    uint32_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&id), sizeof id);
    in.read(reinterpret_cast<char*>(&rows), sizeof rows);
    in.read(reinterpret_cast<char*>(&cols), sizeof cols);
    if (!in || rows == 0 || cols == 0) throw data_error(path + ": truncated feature record");
    Tensor t = Tensor::zeros({rows, cols});
    in.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!in) throw data_error(path + ": truncated feature record");
    if (!feats.emplace(id, std::move(t)).second)
      throw data_error(path + ": duplicate image_id " + std::to_string(id));
  }
  return feats;
}

}  // namespace

void save_split(const std::string& dir, const Dataset& ds,
                const std::vector<std::pair<long long, std::vector<std::string>>>* captions,
                bool binary_features) {
  json questions = json::array();
  json annotations = json::array();
  std::vector<std::pair<long long, const Tensor*>> feats;
  std::unordered_set<long long> seen_images;
  json si = json::object();
  for (const VqaExample& ex : ds.examples) {
    questions.push_back({{"question_id", ex.question_id},
                         {"image_id", ex.image_id},
                         {"question", ex.question}});
    if (ds.has_annotations) {
      json answers = json::array();
      for (const std::string& a : ex.answers) answers.push_back({{"answer", a}});
      annotations.push_back({{"question_id", ex.question_id},
                             {"image_id", ex.image_id},
                             {"answer_type", ex.category},
                             {"multiple_choice_answer", ex.canonical_answer},
                             {"answers", answers}});
    }
    if (seen_images.insert(ex.image_id).second) {
      feats.emplace_back(ex.image_id, &ex.image_feats);
      si[std::to_string(ex.image_id)] = ex.si_words;
    }
  }
  write_text(dir + "/questions.json", json{{"questions", questions}}.dump());
  if (ds.has_annotations)
    write_text(dir + "/annotations.json", json{{"annotations", annotations}}.dump());
  write_text(dir + "/si.json", si.dump());
  if (binary_features) {
    write_features_bin(dir + "/features.bin", feats);
  } else {
    json jf = json::array();
    for (const auto& [id, t] : feats) {
      json data = json::array();
      for (double v : t->data()) data.push_back(v);
      jf.push_back({{"image_id", id},
                    {"rows", t->rows()},
                    {"cols", t->cols()},
                    {"data", std::move(data)}});
    }
    write_text(dir + "/features.json", json{{"features", jf}}.dump());
  }
  if (captions) {
    json jc = json::object();
    for (const auto& [id, caps] : *captions) jc[std::to_string(id)] = caps;
    write_text(dir + "/captions.json", jc.dump());
  }
}

Dataset load_split_files(const std::string& questions_path, const std::string& annotations_path,
                         const std::string& features_path, const std::string& si_path) {
  Dataset ds;

  json jq = parse_json(read_text(questions_path), questions_path);
  if (!jq.is_object() || !jq.contains("questions") || !jq["questions"].is_array())
    throw data_error(questions_path + ": expected an object with a \"questions\" array");

  std::unordered_map<long long, Tensor> feats;
  if (features_path.size() > 4 && features_path.substr(features_path.size() - 4) == ".bin") {
    feats = read_features_bin(features_path);
  } else {
    json jf = parse_json(read_text(features_path), features_path);
    if (!jf.is_object() || !jf.contains("features") || !jf["features"].is_array())
      throw data_error(features_path + ": expected an object with a \"features\" array");
    for (const json& rec : jf["features"]) {
      long long id = rec.at("image_id").get<long long>();
      size_t rows = rec.at("rows").get<size_t>();
      size_t cols = rec.at("cols").get<size_t>();
      const json& cells = rec.at("data");
      if (cells.size() != rows * cols)
        throw data_error(features_path + ": image " + std::to_string(id) + " has " +
                         std::to_string(cells.size()) + " values, expected " +
                         std::to_string(rows * cols));
      Tensor t = Tensor::zeros({rows, cols});
      for (size_t i = 0; i < t.numel(); ++i) t.data()[i] = cells[i].get<double>();
      if (!feats.emplace(id, std::move(t)).second)
        throw data_error(features_path + ": duplicate image_id " + std::to_string(id));
    }
  }

  std::unordered_map<long long, std::vector<std::string>> si;
  if (!si_path.empty() && file_exists(si_path)) {
    json js = parse_json(read_text(si_path), si_path);
    if (!js.is_object()) throw data_error(si_path + ": expected an object keyed by image_id");
    for (const auto& [key, words] : js.items()) {
      std::vector<std::string> toks;
      for (const json& w : words) toks.push_back(w.get<std::string>());
      si.emplace(std::stoll(key), std::move(toks));
    }
  }

  struct Annotation {
    std::string canonical, category;
    std::vector<std::string> answers;
  };
  std::unordered_map<long long, Annotation> anns;
  bool have_anns = !annotations_path.empty() && file_exists(annotations_path);
  if (have_anns) {
    json ja = parse_json(read_text(annotations_path), annotations_path);
    if (!ja.is_object() || !ja.contains("annotations") || !ja["annotations"].is_array())
      throw data_error(annotations_path + ": expected an object with an \"annotations\" array");
    for (const json& rec : ja["annotations"]) {
      Annotation ann;
      long long qid = rec.at("question_id").get<long long>();
      ann.canonical = rec.at("multiple_choice_answer").get<std::string>();
      ann.category = rec.at("answer_type").get<std::string>();
      for (const json& a : rec.at("answers"))
        ann.answers.push_back(a.at("answer").get<std::string>());
      if (!anns.emplace(qid, std::move(ann)).second)
        throw data_error(annotations_path + ": duplicate question_id " + std::to_string(qid));
    }
  }
  ds.has_annotations = have_anns;

  std::unordered_set<long long> seen_questions;
  std::vector<long long> missing_feats, missing_anns;
  std::unordered_set<long long> counted_missing_si;
  for (const json& rec : jq["questions"]) {
    VqaExample ex;
    ex.question_id = rec.at("question_id").get<long long>();
    ex.image_id = rec.at("image_id").get<long long>();
    ex.question = rec.at("question").get<std::string>();
    if (!seen_questions.insert(ex.question_id).second)
      throw data_error(questions_path + ": duplicate question_id " +
                       std::to_string(ex.question_id));
    auto fit = feats.find(ex.image_id);
    if (fit == feats.end()) {
      missing_feats.push_back(ex.image_id);
      continue;
    }
    ex.image_feats = fit->second;
    auto sit = si.find(ex.image_id);
    if (sit != si.end()) {
      ex.si_words = sit->second;
    } else if (counted_missing_si.insert(ex.image_id).second) {
      ++ds.missing_si;
    }
    if (have_anns) {
      auto ait = anns.find(ex.question_id);
      if (ait == anns.end()) {
        missing_anns.push_back(ex.question_id);
        continue;
      }
      if (ait->second.answers.size() != 10)
        throw data_error(annotations_path + ": question " + std::to_string(ex.question_id) +
                         " has " + std::to_string(ait->second.answers.size()) +
                         " answers, expected 10");
      ex.canonical_answer = ait->second.canonical;
      ex.category = ait->second.category;
      ex.answers = ait->second.answers;
    }
    ds.examples.push_back(std::move(ex));
  }
  if (!missing_feats.empty())
    throw data_error(questions_path + ": questions reference image_ids with no features: " +
                     list_ids(missing_feats));
  if (!missing_anns.empty())
    throw data_error(annotations_path + ": no annotation for question_ids: " +
                     list_ids(missing_anns));
  return ds;
}

Dataset load_split(const std::string& dir) {
  std::string features = dir + "/features.json";
  if (!file_exists(features)) features = dir + "/features.bin";
  return load_split_files(dir + "/questions.json", dir + "/annotations.json", features,
                          dir + "/si.json");
}

std::vector<VqaExample> scale_split(const std::vector<VqaExample>& examples, double fraction,
                                    uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw config_error("scale fraction must lie in (0, 1], got " + std::to_string(fraction));
  size_t n = examples.size();
  size_t keep = static_cast<size_t>(std::ceil(fraction * static_cast<double>(n)));
  keep = std::min(keep, n);
  std::vector<size_t> perm = Rng(Rng::derive(seed, {kTagScale})).permutation(n);
  std::vector<VqaExample> out;
  out.reserve(keep);
  for (size_t i = 0; i < keep; ++i) out.push_back(examples[perm[i]]);
  return out;
}

uint64_t fnv1a_file(const std::string& path) {
  std::string bytes = read_text(path);
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace vqacoin::data
