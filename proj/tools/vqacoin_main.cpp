#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vqacoin/checkpoint.hpp"
#include "vqacoin/config.hpp"
#include "vqacoin/data.hpp"
#include "vqacoin/error.hpp"
#include "vqacoin/eval.hpp"
#include "vqacoin/kernels.hpp"
#include "vqacoin/model.hpp"
#include "vqacoin/textprep.hpp"
#include "vqacoin/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vqacoin;

namespace {

bool log_debug_enabled() {
  const char* v = std::getenv("VQACOIN_LOG");
  return v && std::string(v) == "debug";
}

RunConfig build_config(const std::string& config_path, const std::vector<std::string>& sets) {
  RunConfig cfg = config_path.empty() ? RunConfig::defaults() : RunConfig::from_file(config_path);
  for (const std::string& s : sets) cfg.apply_override(s);
  kernels::set_execution(cfg.parallel_kernels() ? kernels::Exec::parallel
                                                : kernels::Exec::serial);
  kernels::set_precision(cfg.f32_kernels() ? kernels::Precision::f32 : kernels::Precision::f64);
  if (log_debug_enabled())
    std::fprintf(stderr, "config: %s\n", cfg.resolved().dump().c_str());
  return cfg;
}

json hash_entry(const std::string& path) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%016llx",
                static_cast<unsigned long long>(data::fnv1a_file(path)));
  return json{{"fnv1a", buf}, {"bytes", fs::file_size(path)}};
}

void write_manifest(const std::string& path, const RunConfig& cfg, const std::string& command,
                    json extra) {
  json m{{"command", command}, {"config", cfg.resolved()}};
  for (auto& [k, v] : extra.items()) m[k] = v;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot write " + path);
  f << m.dump(2) << "\n";
}

json hash_dir(const std::string& dir) {
  json files = json::object();
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  for (const std::string& n : names) files[n] = hash_entry(dir + "/" + n);
  return files;
}

void print_report(const eval::EvalReport& report) {
  std::printf("examples: %zu\n", report.examples);
  std::printf("overall accuracy: %.4f\n", report.overall);
  for (const auto& c : report.categories)
    std::printf("  %-8s %.4f  (%zu examples)\n", c.category.c_str(), c.accuracy, c.count);
}

model::VqaCoinModel load_model(const std::string& ckpt_path) {
  return checkpoint::to_model(checkpoint::load(ckpt_path));
}

int run_gen_data(const RunConfig& cfg, const std::string& out_dir, bool binary_features) {
  DataGenConfig dg = cfg.datagen();
  size_t d_image = cfg.model().d_image;
  data::Corpus corpus = data::generate_corpus(dg, d_image, cfg.seed());
  fs::create_directories(out_dir + "/train");
  fs::create_directories(out_dir + "/val");
  data::save_split(out_dir + "/train", corpus.train, &corpus.train_captions, binary_features);
  data::save_split(out_dir + "/val", corpus.val, &corpus.val_captions, binary_features);
  write_manifest(out_dir + "/manifest.json", cfg, "gen-data",
                 json{{"train_examples", corpus.train.examples.size()},
                      {"val_examples", corpus.val.examples.size()},
                      {"files",
                       {{"train", hash_dir(out_dir + "/train")},
                        {"val", hash_dir(out_dir + "/val")}}}});
  std::printf("wrote %zu train / %zu val examples to %s\n", corpus.train.examples.size(),
              corpus.val.examples.size(), out_dir.c_str());
  return 0;
}

int run_prep(const RunConfig& cfg, const std::string& data_dir,
             const std::string& wordlists_dir) {
  textprep::Wordlists lists = wordlists_dir.empty() ? textprep::Wordlists::builtin()
                                                    : textprep::Wordlists::load(wordlists_dir);
  std::string cap_path = data_dir + "/captions.json";
  std::ifstream cap_in(cap_path, std::ios::binary);
  if (!cap_in) throw io_error("cannot open " + cap_path);
  json caps;
  try {
    caps = json::parse(cap_in);
  } catch (const json::parse_error& e) {
    throw data_error(cap_path + ": parse error at byte " + std::to_string(e.byte) + ": " +
                     e.what());
  }
  json si = json::object();
  size_t dropped_sentences = 0, kept_words = 0;
  for (const auto& [key, sentences] : caps.items()) {
    std::vector<std::string> raw;
    for (const json& s : sentences) raw.push_back(s.get<std::string>());
    std::vector<std::string> selected = textprep::dedup_captions(raw);
    dropped_sentences += raw.size() - selected.size();
    std::vector<std::string> words = textprep::filter_content_words(selected, lists);
    kept_words += words.size();
    si[key] = words;
  }
  std::ofstream out(data_dir + "/si.json", std::ios::binary);
  if (!out) throw io_error("cannot write " + data_dir + "/si.json");
  out << si.dump();
  out.close();

  data::Dataset ds = data::load_split(data_dir);
  textprep::Vocabulary vocab;
  textprep::AnswerSet answers;
  train::build_vocab_and_answers(ds.examples, cfg.datagen().answer_min_occurrences, vocab,
                                 answers);
  std::ofstream vout(data_dir + "/vocab.json", std::ios::binary);
  vout << json{{"tokens", vocab.id_to_token}}.dump() << "\n";
  std::ofstream aout(data_dir + "/answers.json", std::ios::binary);
  aout << json{{"answers", answers.id_to_answer}}.dump() << "\n";

  std::printf("images: %zu, dropped near-duplicate captions: %zu, semantic-info words: %zu\n",
              caps.size(), dropped_sentences, kept_words);
  std::printf("vocabulary: %zu tokens, answer classes: %zu\n", vocab.size(), answers.size());
  if (ds.missing_si)
    std::fprintf(stderr, "warning: %zu images have no semantic info\n", ds.missing_si);
  return 0;
}

int run_train(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir,
              const std::string& resume_path) {
  data::Dataset train_ds = data::load_split(data_dir + "/train");
  data::Dataset val_ds = data::load_split(data_dir + "/val");
  if (train_ds.missing_si)
    std::fprintf(stderr, "warning: %zu train images have no semantic info\n",
                 train_ds.missing_si);

  fs::create_directories(out_dir);
  checkpoint::Checkpoint resume_ck;
  model::VqaCoinModel m = [&] {
    if (!resume_path.empty()) {
      resume_ck = checkpoint::load(resume_path);
      ModelConfig requested = cfg.model();
      requested.answer_count = resume_ck.cfg.answer_count;
      checkpoint::check_config_match(resume_ck.cfg, requested);
      return checkpoint::to_model(resume_ck);
    }
    textprep::Vocabulary vocab;
    textprep::AnswerSet answers;
    train::build_vocab_and_answers(train_ds.examples, cfg.datagen().answer_min_occurrences,
                                   vocab, answers);
    return model::VqaCoinModel::init(cfg.model(), std::move(vocab), std::move(answers),
                                     cfg.seed());
  }();

  train::TrainOptions opt;
  opt.seed = cfg.seed();
  opt.pad_batches = cfg.pad_batches();
  opt.exact_soft_accuracy = cfg.exact_soft_accuracy();
  opt.metrics_path = out_dir + "/metrics.jsonl";
  opt.best_path = out_dir + "/best.ckpt";
  opt.last_path = out_dir + "/last.ckpt";
  if (!resume_path.empty()) opt.resume = &resume_ck;

  train::TrainResult result = train_loop(m, cfg.schedule(), train_ds.examples, val_ds.examples,
                                         opt);
  write_manifest(out_dir + "/manifest.json", cfg, "train",
                 json{{"data", {{"train", hash_dir(data_dir + "/train")},
                                {"val", hash_dir(data_dir + "/val")}}},
                      {"parameter_count", m.param_count()},
                      {"best_epoch", result.best_epoch},
                      {"best_val_accuracy", result.best_val_accuracy}});
  std::printf("best val accuracy %.4f at epoch %zu\n", result.best_val_accuracy,
              result.best_epoch);
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_dir, bool exact,
             const std::string& export_path) {
  model::VqaCoinModel m = load_model(ckpt_path);
  data::Dataset ds = data::load_split(data_dir);
  if (!ds.has_annotations) {
    if (export_path.empty())
      throw data_error(data_dir + " has no annotations, so there is nothing to score; "
                       "use --export or the predict command to produce predictions");
    std::vector<eval::Prediction> preds;
    Rng rng(0);
    for (const data::VqaExample& ex : ds.examples) {
      model::ModelOutputs out = m.forward(eval::encode(m, ex, false), false, rng);
      preds.push_back({ex.question_id,
                       m.answers.id_to_answer[model::argmax_lowest(out.logits->value.data())]});
    }
    eval::export_results(export_path, std::move(preds));
    std::printf("no annotations: wrote predictions for %zu questions to %s\n",
                ds.examples.size(), export_path.c_str());
    return 0;
  }
  std::vector<eval::Prediction> preds;
  eval::EvalReport report =
      eval::evaluate(m, ds.examples, exact, export_path.empty() ? nullptr : &preds);
  print_report(report);
  if (!export_path.empty()) eval::export_results(export_path, std::move(preds));
  return 0;
}

int run_predict(const std::string& ckpt_path, const std::string& data_dir,
                const std::string& out_path) {
  model::VqaCoinModel m = load_model(ckpt_path);
  data::Dataset ds = data::load_split(data_dir);
  std::vector<eval::Prediction> preds;
  Rng rng(0);
  for (const data::VqaExample& ex : ds.examples) {
    model::ModelOutputs out = m.forward(eval::encode(m, ex, false), false, rng);
    preds.push_back({ex.question_id,
                     m.answers.id_to_answer[model::argmax_lowest(out.logits->value.data())]});
  }
  eval::export_results(out_path, std::move(preds));
  std::printf("wrote %zu predictions to %s\n", ds.examples.size(), out_path.c_str());
  return 0;
}

int run_scale(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir,
              std::vector<double> fractions, std::vector<uint64_t> seeds) {
  data::Dataset train_ds = data::load_split(data_dir + "/train");
  data::Dataset val_ds = data::load_split(data_dir + "/val");
  if (seeds.empty())
    seeds = {cfg.seed(), cfg.seed() + 1, cfg.seed() + 2};
  train::ScalingReport report = train::scaling_experiment(
      cfg.model(), cfg.schedule(), train_ds.examples, val_ds.examples, fractions, seeds,
      cfg.seed(), cfg.datagen().answer_min_occurrences, !log_debug_enabled());

  fs::create_directories(out_dir);
  json points = json::array();
  std::printf("%-10s", "fraction");
  for (uint64_t s : seeds) std::printf("  seed %-6llu", static_cast<unsigned long long>(s));
  std::printf("  mean\n");
  for (const auto& p : report.points) {
    json accs = json::array();
    std::printf("%-10.2f", p.fraction);
    for (double a : p.accuracies) {
      accs.push_back(a);
      std::printf("  %-11.4f", a);
    }
    std::printf("  %.4f\n", p.mean);
    points.push_back({{"fraction", p.fraction}, {"accuracies", accs}, {"mean", p.mean}});
  }
  json seeds_json = json::array();
  for (uint64_t s : seeds) seeds_json.push_back(s);
  std::ofstream f(out_dir + "/scaling.json", std::ios::binary);
  if (!f) throw io_error("cannot write " + out_dir + "/scaling.json");
  f << json{{"seeds", seeds_json}, {"points", points}}.dump(2) << "\n";
  write_manifest(out_dir + "/manifest.json", cfg, "scale",
                 json{{"data", {{"train", hash_dir(data_dir + "/train")},
                                {"val", hash_dir(data_dir + "/val")}}}});
  return 0;
}

int run_attn_dump(const std::string& ckpt_path, const std::string& data_dir,
                  long long question_id, const std::string& out_path) {
  model::VqaCoinModel m = load_model(ckpt_path);
  data::Dataset ds = data::load_split(data_dir);
  const data::VqaExample* target = nullptr;
  for (const data::VqaExample& ex : ds.examples)
    if (ex.question_id == question_id) {
      target = &ex;
      break;
    }
  if (!target)
    throw data_error("question_id " + std::to_string(question_id) + " not found in " + data_dir);

  std::vector<attention::AttentionMap> maps = eval::dump_attention(m, *target);
  std::printf("question %lld: %s\n", question_id, target->question.c_str());
  json jmaps = json::array();
  for (const attention::AttentionMap& map : maps) {
    std::printf("\n%14s", "");
    for (const std::string& c : map.col_labels) std::printf(" %10s", c.c_str());
    std::printf("\n");
    for (size_t r = 0; r < map.weights.rows(); ++r) {
      std::printf("%-14s", map.row_labels[r].c_str());
      for (size_t c = 0; c < map.weights.cols(); ++c)
        std::printf(" %10.4f", map.weights.at(r, c));
      std::printf("\n");
    }
    json rows = json::array();
    for (size_t r = 0; r < map.weights.rows(); ++r) {
      json row = json::array();
      for (size_t c = 0; c < map.weights.cols(); ++c) row.push_back(map.weights.at(r, c));
      rows.push_back(std::move(row));
    }
    jmaps.push_back(
        {{"rows", map.row_labels}, {"cols", map.col_labels}, {"weights", std::move(rows)}});
  }
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw io_error("cannot write " + out_path);
    f << jmaps.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual question answering over synthetic scenes: generation, training, "
               "evaluation, and attention inspection"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "JSON config file (flat dotted keys)");
  app.add_option("--set", sets, "override one config key, as key=value");

  std::string out_dir, data_dir, ckpt_path, export_path, wordlists_dir, resume_path;
  bool binary_features = false, exact = false;
  long long question_id = 0;
  std::vector<double> fractions{0.25, 0.5, 0.75, 1.0};
  std::vector<uint64_t> seeds;

  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_flag("--binary-features", binary_features,
                "write features.bin instead of features.json");

  CLI::App* prep = app.add_subcommand(
      "prep", "Run the caption pipeline and build vocabulary + answer classes");
  prep->add_option("--data", data_dir, "split directory (with captions.json)")->required();
  prep->add_option("--wordlists", wordlists_dir, "directory with the three filter lists");

  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--data", data_dir, "corpus directory (train/ + val/)")->required();
  train_cmd->add_option("--out", out_dir, "run directory for checkpoints and metrics")
      ->required();
  train_cmd->add_option("--resume", resume_path, "continue from a last.ckpt");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a split");
  eval_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  eval_cmd->add_option("--data", data_dir, "split directory")->required();
  eval_cmd->add_flag("--exact", exact, "average over leave-one-annotator-out subsets");
  eval_cmd->add_option("--export", export_path, "also write predictions JSON here");

  CLI::App* predict = app.add_subcommand("predict", "Write predictions for a split");
  predict->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  predict->add_option("--data", data_dir, "split directory")->required();
  predict->add_option("--out", export_path, "predictions JSON path")->required();

  CLI::App* scale = app.add_subcommand("scale", "Training-set-size scaling experiment");
  scale->add_option("--data", data_dir, "corpus directory (train/ + val/)")->required();
  scale->add_option("--out", out_dir, "report directory")->required();
  scale->add_option("--fractions", fractions, "training-set fractions");
  scale->add_option("--seeds", seeds, "model seeds (default: seed, seed+1, seed+2)");

  CLI::App* attn = app.add_subcommand("attn-dump", "Print attention maps for one question");
  attn->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  attn->add_option("--data", data_dir, "split directory")->required();
  attn->add_option("--question-id", question_id, "question to inspect")->required();
  attn->add_option("--out", export_path, "also write the maps as JSON here");

  // --config / --set may appear after the subcommand name
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // bad invocation is a configuration problem
  }

  try {
    RunConfig cfg = build_config(config_path, sets);
    if (gen->parsed()) return run_gen_data(cfg, out_dir, binary_features);
    if (prep->parsed()) return run_prep(cfg, data_dir, wordlists_dir);
    if (train_cmd->parsed()) return run_train(cfg, data_dir, out_dir, resume_path);
    if (eval_cmd->parsed()) return run_eval(ckpt_path, data_dir, exact, export_path);
    if (predict->parsed()) return run_predict(ckpt_path, data_dir, export_path);
    if (scale->parsed()) return run_scale(cfg, data_dir, out_dir, fractions, seeds);
    if (attn->parsed()) return run_attn_dump(ckpt_path, data_dir, question_id, export_path);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.kind()) {
      case ErrorKind::config: return 2;
      case ErrorKind::data: return 3;
      case ErrorKind::numeric: return 4;
      default: return 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
