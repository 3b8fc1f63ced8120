#pragma once

#include <cstddef>
#include <functional>
#include <istream>
#include <string>
#include <vector>

#include "vqacoin/autograd.hpp"
#include "vqacoin/rng.hpp"
#include "vqacoin/tensor.hpp"

namespace vqacoin::layers {

using autograd::Var;

/// Parameter with its checkpoint/optimizer name. Collection order is fixed
/// per layer and is the on-disk tensor order.
struct NamedParam {
  std::string name;
  Var var;
};

Tensor glorot_uniform(size_t fan_in, size_t fan_out, Rng& rng);
/// Square orthogonal matrix via modified Gram-Schmidt on a Gaussian draw.
Tensor orthogonal(size_t n, Rng& rng);

/// Token-id -> vector table. Row 0 is the padding row: zeros at init and
/// excluded from gradient updates, so it stays zeros forever.
struct EmbeddingTable {
  size_t vocab_size = 0;
  size_t dim = 0;
  Var table;  // [vocab_size x dim]

  static EmbeddingTable init(size_t vocab_size, size_t dim, Rng& rng);

  /// [len x dim] gather; out-of-range ids raise a vocabulary error.
  Var lookup(const std::vector<size_t>& ids) const;

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

/// Loads "word v1 v2 ... v<dim>" lines into table rows. `resolve` maps a
/// word to its vocabulary id, or a negative value when unknown (those lines
/// keep their random init). Returns the number of rows written. Rows 0 (pad)
/// is never overwritten.
size_t load_embedding_file(EmbeddingTable& table, std::istream& in,
                           const std::function<long long(const std::string&)>& resolve);

/// Fully connected layer with weight normalization: effective column j is
/// gain[j] * direction[:,j] / ||direction[:,j]||, recomputed inside every
/// forward so updates can never leave a stale normalization.
struct WeightNormLinear {
  size_t in = 0;
  size_t out = 0;
  Var direction;  // [in x out]
  Var gain;       // [out]
  Var bias;       // [out]

  /// Gains start at the column norms, so the initial effective weight
  /// equals the raw uniform init.
  static WeightNormLinear init(size_t in, size_t out, Rng& rng);

  Var effective_weight() const;
  /// x [n x in] -> [n x out], no activation.
  Var forward(const Var& x) const;

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct Linear {
  size_t in = 0;
  size_t out = 0;
  Var weight;  // [in x out]
  Var bias;    // [out]

  static Linear init(size_t in, size_t out, Rng& rng);

  Var forward(const Var& x) const;

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

/// Gated recurrent unit: z = sig(W_z x + U_z h + b_z), r likewise,
/// cand = tanh(W_h x + U_h (r.h) + b_h), h' = (1-z).h + z.cand.
struct GruCell {
  size_t input_dim = 0;
  size_t hidden_dim = 0;
  Var w_z, u_z, b_z;
  Var w_r, u_r, b_r;
  Var w_h, u_h, b_h;

  /// Input matrices Glorot-uniform, recurrent matrices orthogonal, biases
  /// zero.
  static GruCell init(size_t input_dim, size_t hidden_dim, Rng& rng);

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

/// Runs the cell over inputs [n x input_dim] from h0 (length hidden_dim;
/// undefined tensor means zeros) and returns all hidden states
/// [n x hidden_dim], h_1 first.
Var gru_scan(const GruCell& cell, const Var& inputs, const Tensor& h0 = Tensor());

/// Inverted dropout: kept entries scaled by 1/(1-rate) during training,
/// identity in eval mode.
Var dropout(const Var& x, double rate, bool training, Rng& rng);

}  // namespace vqacoin::layers
