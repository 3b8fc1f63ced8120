#include "vqacoin/model.hpp"

#include <string>

#include "vqacoin/error.hpp"

namespace vqacoin::model {

using namespace autograd;

VqaCoinModel VqaCoinModel::init(const ModelConfig& cfg, textprep::Vocabulary vocab,
                                textprep::AnswerSet answers, uint64_t seed) {
  cfg.validate();
  if (answers.size() == 0) throw config_error("model needs a non-empty answer set");
  if (cfg.answer_count != 0 && cfg.answer_count != answers.size())
    throw config_error("config expects " + std::to_string(cfg.answer_count) +
                       " answers but the answer set has " + std::to_string(answers.size()));

  VqaCoinModel m;
  m.cfg = cfg;
  m.vocab = std::move(vocab);
  m.answers = std::move(answers);

  // Per-component substreams: adding a component never shifts another's init.
  auto sub = [&](uint64_t tag) { return Rng::derive(seed, {tag}); };
  Rng r0 = sub(0);
  m.embed = layers::EmbeddingTable::init(m.vocab.size(), cfg.embed_dim, r0);
  Rng r1 = sub(1);
  m.gru_q_large = layers::GruCell::init(cfg.embed_dim, cfg.d_q_large, r1);
  Rng r2 = sub(2);
  m.gru_q_small = layers::GruCell::init(cfg.embed_dim, cfg.d_q_small, r2);
  Rng r3 = sub(3);
  m.gru_si = layers::GruCell::init(cfg.embed_dim, cfg.d_q_small, r3);
  Rng r4 = sub(4);
  m.self_attn = attention::SelfAttentionHead::init(cfg.d_q_small, r4);
  for (size_t g = 0; g < cfg.glimpses_image; ++g) {
    Rng rg = sub(16 + g);
    m.image_glimpses.push_back(attention::BilinearGlimpse::init(cfg.d_image, cfg.d_q_large,
                                                                cfg.d_attn, cfg.d_q_large, rg));
  }
  Rng r5 = sub(5);
  m.si_glimpse = attention::BilinearGlimpse::init(cfg.d_q_small, cfg.d_q_small, cfg.d_attn,
                                                  cfg.d_q_small, r5);
  Rng r6 = sub(6);
  size_t d_pooled = cfg.d_q_large + 2 * cfg.d_q_small;
  m.cls_hidden = layers::WeightNormLinear::init(d_pooled, cfg.d_cls_hidden, r6);
  Rng r7 = sub(7);
  m.cls_out = layers::Linear::init(cfg.d_cls_hidden, m.answers.size(), r7);
  return m;
}

std::vector<layers::NamedParam> VqaCoinModel::params() const {
  std::vector<layers::NamedParam> out;
  embed.collect("embed", out);
  gru_q_large.collect("gru_q_large", out);
  gru_q_small.collect("gru_q_small", out);
  gru_si.collect("gru_si", out);
  self_attn.collect("self_attn", out);
  for (size_t g = 0; g < image_glimpses.size(); ++g)
    image_glimpses[g].collect("image_glimpse" + std::to_string(g), out);
  si_glimpse.collect("si_glimpse", out);
  cls_hidden.collect("cls_hidden", out);
  cls_out.collect("cls_out", out);
  return out;
}

size_t VqaCoinModel::param_count() const {
  size_t n = 0;
  for (const auto& p : params()) n += p.var->value.numel();
  return n;
}

std::vector<size_t> VqaCoinModel::encode_question(const std::string& question) const {
  std::vector<std::string> toks = textprep::tokenize_question(question, cfg.n_q_max);
  std::vector<size_t> ids;
  ids.reserve(toks.size());
  for (const std::string& t : toks) ids.push_back(vocab.id(t));
  return ids;
}

std::vector<size_t> VqaCoinModel::encode_si(const std::vector<std::string>& si_words) const {
  std::vector<size_t> ids;
  for (const std::string& w : si_words) {
    if (ids.size() == cfg.si_max) break;
    ids.push_back(vocab.id(w));
  }
  return ids;
}

ModelOutputs VqaCoinModel::forward(const EncodedExample& ex, bool training, Rng& rng) const {
  if (ex.question.empty()) throw contract_error("forward: empty question");
  if (ex.question.size() > cfg.n_q_max)
    throw dimension_error("forward: question has " + std::to_string(ex.question.size()) +
                          " tokens, cap is " + std::to_string(cfg.n_q_max));
  if (ex.si.size() > cfg.si_max)
    throw dimension_error("forward: semantic info has " + std::to_string(ex.si.size()) +
                          " tokens, cap is " + std::to_string(cfg.si_max));
  if (!ex.image_feats.defined() || ex.image_feats.rank() != 2 ||
      ex.image_feats.cols() != cfg.d_image)
    throw dimension_error("forward: image features must be [f_i x " +
                          std::to_string(cfg.d_image) + "]");

  ModelOutputs out;

  // Question, encoded twice from shared embeddings.
  Var emb_q = embed.lookup(ex.question);
  Var h_large = layers::gru_scan(gru_q_large, emb_q);  // [n_q x d_q_large]
  Var h_small = layers::gru_scan(gru_q_small, emb_q);  // [n_q x d_q_small]

  // Per-word importance; context rows at masked positions are exact zeros.
  attention::SelfAttentionResult sa = attention::self_attend(self_attn, h_small, ex.live_q);
  out.self_weights = sa.weights;

  // Image branch: residual glimpse stack over (objects, wide question).
  Var image = constant(ex.image_feats);
  attention::GlimpseStackResult gs =
      attention::glimpse_stack(image_glimpses, image, h_large, ex.live_image, ex.live_q);
  out.image_maps = gs.maps;
  Var pooled_image = gs.q_final;  // [n_q x d_q_large]

  // SI branch: one glimpse against the self-attention context. No semantic
  // info means no residual, so the branch degenerates to the context itself.
  Var si_seq;  // [n_q x d_q_small]
  if (!ex.si.empty()) {
    Var emb_si = embed.lookup(ex.si);
    Var h_si = layers::gru_scan(gru_si, emb_si);  // [n_si x d_q_small]
    attention::SiBranchResult sb =
        attention::si_branch(si_glimpse, h_si, sa.context, ex.live_si, ex.live_q);
    si_seq = sb.out;
    out.si_map = sb.map;
    out.si_used = true;
  } else {
    si_seq = sa.context;
  }

  // Sum-pool each branch over question positions. In padded mode the image
  // and SI branches carry nonzero values at pad rows (the residual add is
  // broadcast), so those rows are zeroed first; the context needs no mask.
  if (ex.live_q.defined()) {
    Var live = constant(ex.live_q);
    pooled_image = scale_rows(live, pooled_image);
    si_seq = scale_rows(live, si_seq);
  }
  Var z = concat({reduce_sum(pooled_image, 0), reduce_sum(si_seq, 0),
                  reduce_sum(sa.context, 0)});
  out.pooled = z;

  Var zd = layers::dropout(z, cfg.dropout_classifier, training, rng);
  Var hidden = relu(cls_hidden.forward(reshape(zd, {size_t{1}, z->value.numel()})));
  Var hd = layers::dropout(hidden, cfg.dropout_fc, training, rng);
  out.logits = reshape(cls_out.forward(hd), {answers.size()});
  return out;
}

size_t argmax_lowest(std::span<const double> values) {
  if (values.empty()) throw contract_error("argmax over an empty span");
  size_t best = 0;
  for (size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace vqacoin::model
