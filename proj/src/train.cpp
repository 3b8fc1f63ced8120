#include "vqacoin/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "vqacoin/autograd.hpp"
#include "vqacoin/error.hpp"
#include "vqacoin/eval.hpp"
#include "vqacoin/rng.hpp"

namespace vqacoin::train {

using autograd::GradTape;
using autograd::Var;
using nlohmann::json;

namespace {
constexpr uint64_t kTagShuffle = 0x30;
constexpr uint64_t kTagDropout = 0x31;
}  // namespace

double lr_at_epoch(const TrainSchedule& s, size_t epoch) {
  if (epoch < 1 || epoch > s.epochs)
    throw contract_error("lr_at_epoch: epoch " + std::to_string(epoch) +
                         " outside [1, " + std::to_string(s.epochs) + "]");
  if (epoch <= s.warmup_epochs) {
    if (s.warmup_epochs == 1) return s.lr_plateau;
    return s.lr_start + (s.lr_plateau - s.lr_start) * static_cast<double>(epoch - 1) /
                            static_cast<double>(s.warmup_epochs - 1);
  }
  if (epoch <= s.plateau_until_epoch) return s.lr_plateau;
  std::vector<size_t> decays = s.decay_epochs;
  std::sort(decays.begin(), decays.end());
  double v = s.lr_plateau;
  for (size_t d : decays)
    if (d <= epoch) v *= s.decay;
  return v;
}

double clip_global_norm(const std::vector<layers::NamedParam>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.var->grad_seen) continue;
    if (!p.var->grad.all_finite())
      throw numeric_error("non-finite gradient in \"" + p.name + "\"");
    for (double g : p.var->grad.data()) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (const auto& p : params) {
      if (!p.var->grad_seen) continue;
      for (double& g : p.var->grad.data()) g *= scale;
    }
  }
  return norm;
}

Adamax::Adamax(std::vector<layers::NamedParam> params_) : params(std::move(params_)) {
  m.reserve(params.size());
  u.reserve(params.size());
  for (const auto& p : params) {
    m.push_back(Tensor::zeros(p.var->value.shape()));
    u.push_back(Tensor::zeros(p.var->value.shape()));
  }
}

void Adamax::apply(double lr) {
  ++step;
  double bias = 1.0 - std::pow(beta1, static_cast<double>(step));
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    bool seen = p.var->grad_seen;
    if (seen && !p.var->grad.all_finite())
      throw numeric_error("non-finite gradient in \"" + p.name + "\"");
    auto theta = p.var->value.data();
    auto mi = m[i].data();
    auto ui = u[i].data();
    for (size_t k = 0; k < theta.size(); ++k) {
      double g = seen ? p.var->grad.data()[k] : 0.0;
      mi[k] = beta1 * mi[k] + (1.0 - beta1) * g;
      ui[k] = std::max(beta2 * ui[k], std::fabs(g));
      theta[k] -= lr / bias * mi[k] / (ui[k] + eps);
    }
  }
}

void build_vocab_and_answers(const std::vector<data::VqaExample>& train_set,
                             size_t answer_min_occurrences, textprep::Vocabulary& vocab,
                             textprep::AnswerSet& answers) {
  std::vector<std::vector<std::string>> docs;
  std::vector<std::string> canonicals;
  for (const data::VqaExample& ex : train_set) {
    docs.push_back(textprep::tokenize(ex.question));
    if (!ex.si_words.empty()) docs.push_back(ex.si_words);
    std::string canon = data::normalize_answer(ex.canonical_answer);
    if (!canon.empty()) canonicals.push_back(std::move(canon));
  }
  vocab = textprep::Vocabulary::build(docs);
  answers = textprep::AnswerSet::build(canonicals, answer_min_occurrences);
}

namespace {

checkpoint::Checkpoint snapshot(const model::VqaCoinModel& m, const Adamax* opt,
                                size_t epochs_done) {
  checkpoint::Checkpoint ck = checkpoint::from_model(m);
  if (opt) {
    ck.has_optimizer = true;
    ck.step = opt->step;
    ck.epochs_done = epochs_done;
    for (size_t i = 0; i < opt->params.size(); ++i) {
      ck.opt_m.emplace_back(opt->params[i].name, opt->m[i]);
      ck.opt_u.emplace_back(opt->params[i].name, opt->u[i]);
    }
  }
  return ck;
}

void restore_optimizer(Adamax& opt, const checkpoint::Checkpoint& ck) {
  if (!ck.has_optimizer)
    throw data_error("resume checkpoint carries no optimizer state");
  if (ck.opt_m.size() != opt.params.size())
    throw data_error("resume checkpoint optimizes " + std::to_string(ck.opt_m.size()) +
                     " tensors, run expects " + std::to_string(opt.params.size()));
  for (size_t i = 0; i < opt.params.size(); ++i) {
    if (ck.opt_m[i].first != opt.params[i].name)
      throw data_error("resume optimizer tensor \"" + ck.opt_m[i].first +
                       "\" does not match \"" + opt.params[i].name + "\"");
    opt.m[i] = ck.opt_m[i].second;
    opt.u[i] = ck.opt_u[i].second;
  }
  opt.step = ck.step;
}

}  // namespace

TrainResult train_loop(model::VqaCoinModel& m, const TrainSchedule& sched,
                       const std::vector<data::VqaExample>& train_set,
                       const std::vector<data::VqaExample>& val_set, const TrainOptions& opt) {
  sched.validate();
  if (train_set.empty()) throw contract_error("train_loop: empty training set");
  for (const data::VqaExample& ex : train_set)
    if (ex.answers.size() != 10)
      throw contract_error("training example " + std::to_string(ex.question_id) + " has " +
                           std::to_string(ex.answers.size()) + " answers, expected 10");

  std::vector<layers::NamedParam> all_params = m.params();
  std::vector<layers::NamedParam> opt_params;
  if (sched.classifier_only) {
    for (const auto& p : all_params)
      if (p.name.rfind("cls_", 0) == 0) opt_params.push_back(p);
  } else {
    opt_params = all_params;
  }
  Adamax adamax(std::move(opt_params));

  size_t start_epoch = 0;
  if (opt.resume) {
    restore_optimizer(adamax, *opt.resume);
    start_epoch = opt.resume->epochs_done;
    if (start_epoch >= sched.epochs)
      throw config_error("resume checkpoint already ran " + std::to_string(start_epoch) +
                         " of " + std::to_string(sched.epochs) + " epochs");
  }

  std::ofstream metrics;
  if (!opt.metrics_path.empty()) {
    metrics.open(opt.metrics_path, opt.resume ? std::ios::app : std::ios::trunc);
    if (!metrics) throw io_error("cannot write " + opt.metrics_path);
  }

  // Soft targets never change; build them once per example.
  std::vector<Tensor> targets;
  std::vector<long long> hard;
  targets.reserve(train_set.size());
  for (const data::VqaExample& ex : train_set) {
    if (m.cfg.softmax_loss)
      hard.push_back(eval::hard_target(m.answers, ex.answers));
    else
      targets.push_back(eval::soft_targets(m.answers, ex.answers));
  }

  TrainResult result;
  result.best_val_accuracy = -1.0;
  size_t n = train_set.size();
  for (size_t epoch = start_epoch + 1; epoch <= sched.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    double lr = lr_at_epoch(sched, epoch);
    std::vector<size_t> order =
        Rng::derive(opt.seed, {kTagShuffle, epoch}).permutation(n);

    double loss_sum = 0.0;
    size_t loss_terms = 0;
    for (size_t start = 0; start < n; start += sched.batch_size) {
      size_t end = std::min(n, start + sched.batch_size);
      size_t batch_index = start / sched.batch_size;
      try {
        GradTape tape;
        std::vector<Var> losses;
        for (size_t i = start; i < end; ++i) {
          const data::VqaExample& ex = train_set[order[i]];
          Rng drop = Rng::derive(opt.seed, {kTagDropout, epoch, i});
          model::ModelOutputs out =
              m.forward(eval::encode(m, ex, opt.pad_batches), /*training=*/true, drop);
          if (m.cfg.softmax_loss) {
            long long t = hard[order[i]];
            if (t < 0) continue;  // no annotator answer is a retained class
            losses.push_back(autograd::softmax_xent(out.logits, static_cast<size_t>(t)));
          } else {
            losses.push_back(autograd::bce_with_logits_mean(out.logits, targets[order[i]]));
          }
        }
        if (losses.empty()) continue;
        Var batch_loss = losses[0];
        for (size_t i = 1; i < losses.size(); ++i) batch_loss = autograd::add(batch_loss, losses[i]);
        batch_loss = autograd::scale(batch_loss, 1.0 / static_cast<double>(losses.size()));
        double lv = batch_loss->value.at(0);
        if (!std::isfinite(lv)) throw numeric_error("loss is not finite");

        for (const auto& p : all_params) p.var->zero_grad();
        tape.backward(batch_loss);
        clip_global_norm(all_params, sched.clip_norm);
        adamax.apply(lr);

        loss_sum += lv * static_cast<double>(losses.size());
        loss_terms += losses.size();
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::numeric)
          throw numeric_error("epoch " + std::to_string(epoch) + " batch " +
                              std::to_string(batch_index) + ": " + e.what());
        throw;
      }
    }
    double train_loss = loss_terms ? loss_sum / static_cast<double>(loss_terms) : 0.0;

    double val_accuracy = 0.0;
    if (!val_set.empty())
      val_accuracy = eval::evaluate(m, val_set, opt.exact_soft_accuracy).overall;

    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EpochMetrics em{epoch, lr, train_loss, val_accuracy, wall};
    result.history.push_back(em);
    if (metrics.is_open()) {
      metrics << json{{"epoch", em.epoch},
                      {"lr", em.lr},
                      {"train_loss", em.train_loss},
                      {"val_accuracy", em.val_accuracy},
                      {"wall_time", em.wall_time}}
                     .dump()
              << "\n";
      metrics.flush();
    }
    if (!opt.quiet)
      std::fprintf(stderr, "epoch %zu/%zu  lr %.3e  loss %.4f  val %.4f  (%.1fs)\n", epoch,
                   sched.epochs, lr, train_loss, val_accuracy, wall);

    if (!val_set.empty() && val_accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = val_accuracy;
      result.best_epoch = epoch;
      if (!opt.best_path.empty()) checkpoint::save(opt.best_path, snapshot(m, nullptr, epoch));
    }
    if (!opt.last_path.empty())
      checkpoint::save(opt.last_path, snapshot(m, &adamax, epoch));
  }
  if (result.best_val_accuracy < 0.0) result.best_val_accuracy = 0.0;
  return result;
}

ScalingReport scaling_experiment(const ModelConfig& mcfg, const TrainSchedule& sched,
                                 const std::vector<data::VqaExample>& train_set,
                                 const std::vector<data::VqaExample>& val_set,
                                 const std::vector<double>& fractions,
                                 const std::vector<uint64_t>& seeds, uint64_t data_seed,
                                 size_t answer_min_occurrences, bool quiet) {
  if (fractions.empty() || seeds.empty())
    throw contract_error("scaling_experiment needs at least one fraction and one seed");
  ScalingReport report;
  report.seeds = seeds;
  for (double f : fractions) {
    std::vector<data::VqaExample> subset = data::scale_split(train_set, f, data_seed);
    textprep::Vocabulary vocab;
    textprep::AnswerSet answers;
    build_vocab_and_answers(subset, answer_min_occurrences, vocab, answers);
    ScalePoint point;
    point.fraction = f;
    for (uint64_t seed : seeds) {
      model::VqaCoinModel m = model::VqaCoinModel::init(mcfg, vocab, answers, seed);
      TrainOptions opt;
      opt.seed = seed;
      opt.quiet = quiet;
      TrainResult r = train_loop(m, sched, subset, val_set, opt);
      point.accuracies.push_back(r.best_val_accuracy);
      point.mean += r.best_val_accuracy;
      if (!quiet)
        std::fprintf(stderr, "scale %.2f seed %llu: best val %.4f\n", f,
                     static_cast<unsigned long long>(seed), r.best_val_accuracy);
    }
    point.mean /= static_cast<double>(seeds.size());
    report.points.push_back(std::move(point));
  }
  return report;
}

}  // namespace vqacoin::train
