#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vqacoin/attention.hpp"
#include "vqacoin/autograd.hpp"
#include "vqacoin/config.hpp"
#include "vqacoin/layers.hpp"
#include "vqacoin/rng.hpp"
#include "vqacoin/tensor.hpp"
#include "vqacoin/textprep.hpp"

namespace vqacoin::model {

using autograd::Var;

/// One example, encoded: token ids instead of text, features as a matrix.
/// Live masks are optional (undefined means everything live); they exist for
/// the fixed-shape batching mode, where sequences are padded with id 0.
struct EncodedExample {
  Tensor image_feats;             // [f_i x d_image]
  std::vector<size_t> question;   // 1..n_q_max ids
  std::vector<size_t> si;         // 0..si_max ids; empty means no semantic info
  Tensor live_q;                  // optional [len(question)] 0/1
  Tensor live_image;              // optional [f_i]
  Tensor live_si;                 // optional [len(si)]
};

/// Everything the forward pass produces, attention maps included so
/// inspection tools need no second pass.
struct ModelOutputs {
  Var logits;                  // [n_answers]
  Var pooled;                  // classifier input, before dropout
  Var self_weights;            // [n_q], the per-word question weights
  std::vector<Var> image_maps; // per glimpse: [f_i x n_q]
  Var si_map;                  // [n_si x n_q]; null when SI was empty
  bool si_used = false;
};

/// The full network: a question encoded twice (wide for the image branch,
/// narrow for self-attention), image objects attended through a stack of
/// residual bilinear glimpses, semantic-info words attended once against
/// the self-attention context, everything sum-pooled and classified.
struct VqaCoinModel {
  ModelConfig cfg;
  textprep::Vocabulary vocab;
  textprep::AnswerSet answers;

  layers::EmbeddingTable embed;
  layers::GruCell gru_q_large;
  layers::GruCell gru_q_small;
  layers::GruCell gru_si;
  attention::SelfAttentionHead self_attn;
  std::vector<attention::BilinearGlimpse> image_glimpses;
  attention::BilinearGlimpse si_glimpse;
  layers::WeightNormLinear cls_hidden;
  layers::Linear cls_out;

  static VqaCoinModel init(const ModelConfig& cfg, textprep::Vocabulary vocab,
                           textprep::AnswerSet answers, uint64_t seed);

  /// Fixed registration order; this is also the checkpoint tensor order.
  std::vector<layers::NamedParam> params() const;
  size_t param_count() const;

  /// Tokenize + id-map + truncate. Question truncation keeps the first
  /// n_q_max tokens; SI keeps the first si_max.
  std::vector<size_t> encode_question(const std::string& question) const;
  std::vector<size_t> encode_si(const std::vector<std::string>& si_words) const;

  /// Builds the whole differentiable graph for one example. `rng` drives
  /// dropout and is only touched when training is true.
  ModelOutputs forward(const EncodedExample& ex, bool training, Rng& rng) const;
};

/// Index of the largest value; ties resolve to the lowest index.
size_t argmax_lowest(std::span<const double> values);

}  // namespace vqacoin::model
