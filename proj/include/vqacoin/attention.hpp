#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vqacoin/autograd.hpp"
#include "vqacoin/layers.hpp"
#include "vqacoin/rng.hpp"
#include "vqacoin/tensor.hpp"

namespace vqacoin::attention {

using autograd::Var;

/// Live-position masks are rank-1 tensors with 1 at real positions and 0 at
/// padding; an undefined tensor means everything is live. These helpers turn
/// them into additive pre-softmax tensors (0 at live entries, the mask
/// sentinel at dead ones).
Tensor additive_mask_vector(const Tensor& live);
/// Pair mask for a joint [N x M] map: entry (i,j) is dead unless both sides
/// are live.
Tensor additive_pair_mask(const Tensor& live_x, size_t n, const Tensor& live_y, size_t m);

/// Normalized attention weights plus human-readable labels for inspection
/// dumps (rows x cols).
struct AttentionMap {
  Tensor weights;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
};

/// Per-word importance over a hidden-state sequence: the sequence is passed
/// through two weight-normalized FC+ReLU paths, multiplied elementwise, and
/// reduced to one score per position.
struct SelfAttentionHead {
  size_t d = 0;
  layers::WeightNormLinear fc_q;
  layers::WeightNormLinear fc_v;
  layers::Linear fc_score;

  static SelfAttentionHead init(size_t d, Rng& rng);
  void collect(const std::string& prefix, std::vector<layers::NamedParam>& out) const;
};

struct SelfAttentionResult {
  Var context;  // [n x d]: row i is w[i] * H[i,:]
  Var weights;  // [n], sums to 1, masked positions exactly 0
};

SelfAttentionResult self_attend(const SelfAttentionHead& head, const Var& h,
                                const Tensor& live = Tensor());

/// Low-rank bilinear attention: scoring path U,V,p produces the joint map;
/// feature path U',V' produces the attended vector.
struct BilinearGlimpse {
  size_t d_x = 0, d_y = 0, d_h = 0, d_out = 0;
  Var u;   // [d_x x d_h]
  Var v;   // [d_y x d_h]
  Var p;   // [d_h]
  Var u2;  // [d_x x d_out]
  Var v2;  // [d_y x d_out]

  static BilinearGlimpse init(size_t d_x, size_t d_y, size_t d_h, size_t d_out, Rng& rng);
  void collect(const std::string& prefix, std::vector<layers::NamedParam>& out) const;
};

struct BilinearResult {
  Var joint;  // [d_out]
  Var map;    // [N x M], one distribution over all unmasked pairs
};

BilinearResult bilinear_attend(const BilinearGlimpse& g, const Var& x, const Var& y,
                               const Tensor& live_x = Tensor(), const Tensor& live_y = Tensor());

struct GlimpseStackResult {
  Var q_final;            // [M x d_q]
  std::vector<Var> maps;  // one [N x M] map per glimpse
};

/// Runs G glimpses, each adding its attended vector to every position of
/// the running sequence (residual update).
GlimpseStackResult glimpse_stack(const std::vector<BilinearGlimpse>& glimpses, const Var& x,
                                 const Var& q0, const Tensor& live_x = Tensor(),
                                 const Tensor& live_q = Tensor());

struct SiBranchResult {
  Var out;  // [n x d]: c + broadcast attended vector
  Var map;  // [L x n]
};

/// One glimpse over (semantic info, question context), residually added to
/// the context sequence.
SiBranchResult si_branch(const BilinearGlimpse& g, const Var& s, const Var& c,
                         const Tensor& live_s = Tensor(), const Tensor& live_c = Tensor());

}  // namespace vqacoin::attention
