#include "vqacoin/layers.hpp"

#include <cmath>
#include <sstream>

#include "vqacoin/error.hpp"

namespace vqacoin::layers {

namespace ag = vqacoin::autograd;

Tensor glorot_uniform(size_t fan_in, size_t fan_out, Rng& rng) {
  double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros({fan_in, fan_out});
  for (double& v : t.data()) v = rng.uniform(-a, a);
  return t;
}

Tensor orthogonal(size_t n, Rng& rng) {
  Tensor q = Tensor::zeros({n, n});
  // Draw Gaussian columns, then modified Gram-Schmidt. A column collapsing
  // to near-zero norm is redrawn; with continuous draws this is a
  // probability-zero event guarded against anyway.
  std::vector<double> col(n);
  for (size_t j = 0; j < n; ++j) {
    for (int attempt = 0;; ++attempt) {
      for (size_t i = 0; i < n; ++i) col[i] = rng.normal(0.0, 1.0);
      for (size_t jj = 0; jj < j; ++jj) {
        double dot = 0;
        for (size_t i = 0; i < n; ++i) dot += col[i] * q.at(i, jj);
        for (size_t i = 0; i < n; ++i) col[i] -= dot * q.at(i, jj);
      }
      double norm = 0;
      for (size_t i = 0; i < n; ++i) norm += col[i] * col[i];
      norm = std::sqrt(norm);
      if (norm > 1e-8) {
        for (size_t i = 0; i < n; ++i) q.at(i, j) = col[i] / norm;
        break;
      }
      if (attempt > 16) throw numeric_error("orthogonal: repeated degenerate draws");
    }
  }
  return q;
}

EmbeddingTable EmbeddingTable::init(size_t vocab_size, size_t dim, Rng& rng) {
  if (vocab_size < 2 || dim == 0) {
    throw config_error("embedding: need vocab_size >= 2 and dim >= 1, got " +
                       std::to_string(vocab_size) + "x" + std::to_string(dim));
  }
  EmbeddingTable e;
  e.vocab_size = vocab_size;
  e.dim = dim;
  Tensor t = glorot_uniform(vocab_size, dim, rng);
  for (size_t j = 0; j < dim; ++j) t.at(0, j) = 0.0;  // pad row
  e.table = ag::param(std::move(t));
  return e;
}

Var EmbeddingTable::lookup(const std::vector<size_t>& ids) const {
  return ag::embedding_rows(table, ids, /*freeze_row0=*/true);
}

void EmbeddingTable::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".table", table});
}

size_t load_embedding_file(EmbeddingTable& table, std::istream& in,
                           const std::function<long long(const std::string&)>& resolve) {
  size_t loaded = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    long long id = resolve(word);
    std::vector<double> vals;
    vals.reserve(table.dim);
    double v;
    while (ls >> v) vals.push_back(v);
    if (vals.size() != table.dim) {
      throw data_error("embedding file line " + std::to_string(lineno) + ": expected " +
                       std::to_string(table.dim) + " values, got " + std::to_string(vals.size()));
    }
    if (id <= 0) continue;  // unknown word, or the reserved pad row
    if (static_cast<size_t>(id) >= table.vocab_size) {
      throw vocabulary_error("embedding file line " + std::to_string(lineno) + ": id " +
                             std::to_string(id) + " out of range");
    }
    for (size_t j = 0; j < table.dim; ++j) {
      table.table->value.at(static_cast<size_t>(id), j) = vals[j];
    }
    ++loaded;
  }
  return loaded;
}

WeightNormLinear WeightNormLinear::init(size_t in, size_t out, Rng& rng) {
  WeightNormLinear l;
  l.in = in;
  l.out = out;
  Tensor dir = glorot_uniform(in, out, rng);
  Tensor g = Tensor::zeros({out});
  for (size_t j = 0; j < out; ++j) {
    double s = 0;
    for (size_t i = 0; i < in; ++i) s += dir.at(i, j) * dir.at(i, j);
    g.at(j) = std::sqrt(s);
  }
  l.direction = ag::param(std::move(dir));
  l.gain = ag::param(std::move(g));
  l.bias = ag::param(Tensor::zeros({out}));
  return l;
}

Var WeightNormLinear::effective_weight() const {
  Var norms = ag::sqrt(ag::reduce_sum(ag::hadamard(direction, direction), 0));
  Var col_scale = ag::hadamard(gain, ag::recip(norms));
  return ag::broadcast_mul(direction, col_scale);
}

Var WeightNormLinear::forward(const Var& x) const {
  return ag::broadcast_add(ag::matmul(x, effective_weight()), bias);
}

void WeightNormLinear::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".direction", direction});
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

Linear Linear::init(size_t in, size_t out, Rng& rng) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = ag::param(glorot_uniform(in, out, rng));
  l.bias = ag::param(Tensor::zeros({out}));
  return l;
}

Var Linear::forward(const Var& x) const {
  return ag::broadcast_add(ag::matmul(x, weight), bias);
}

void Linear::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

GruCell GruCell::init(size_t input_dim, size_t hidden_dim, Rng& rng) {
  GruCell c;
  c.input_dim = input_dim;
  c.hidden_dim = hidden_dim;
  auto in_mat = [&] { return ag::param(glorot_uniform(input_dim, hidden_dim, rng)); };
  auto rec_mat = [&] { return ag::param(orthogonal(hidden_dim, rng)); };
  auto bias = [&] { return ag::param(Tensor::zeros({hidden_dim})); };
  c.w_z = in_mat(); c.u_z = rec_mat(); c.b_z = bias();
  c.w_r = in_mat(); c.u_r = rec_mat(); c.b_r = bias();
  c.w_h = in_mat(); c.u_h = rec_mat(); c.b_h = bias();
  return c;
}

void GruCell::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".w_z", w_z});
  out.push_back({prefix + ".u_z", u_z});
  out.push_back({prefix + ".b_z", b_z});
  out.push_back({prefix + ".w_r", w_r});
  out.push_back({prefix + ".u_r", u_r});
  out.push_back({prefix + ".b_r", b_r});
  out.push_back({prefix + ".w_h", w_h});
  out.push_back({prefix + ".u_h", u_h});
  out.push_back({prefix + ".b_h", b_h});
}

Var gru_scan(const GruCell& cell, const Var& inputs, const Tensor& h0) {
  if (inputs->value.rank() != 2 || inputs->value.cols() != cell.input_dim) {
    throw dimension_error("gru_scan: inputs " + inputs->value.shape_str() + " vs input_dim " +
                          std::to_string(cell.input_dim));
  }
  size_t n = inputs->value.rows();
  if (n == 0) throw contract_error("gru_scan: empty sequence");
  size_t hd = cell.hidden_dim;

  Tensor h0row = Tensor::zeros({1, hd});
  if (h0.defined()) {
    if (h0.numel() != hd) {
      throw dimension_error("gru_scan: h0 " + h0.shape_str() + " vs hidden_dim " +
                            std::to_string(hd));
    }
    for (size_t j = 0; j < hd; ++j) h0row.at(0, j) = h0.at(j);
  }

  // Input projections for all steps at once; per-step work is recurrent only.
  Var zx = ag::broadcast_add(ag::matmul(inputs, cell.w_z), cell.b_z);
  Var rx = ag::broadcast_add(ag::matmul(inputs, cell.w_r), cell.b_r);
  Var hx = ag::broadcast_add(ag::matmul(inputs, cell.w_h), cell.b_h);

  Var h = ag::constant(std::move(h0row));
  Var ones = ag::constant(Tensor::full({1, hd}, 1.0));
  std::vector<Var> states;
  states.reserve(n);
  for (size_t t = 0; t < n; ++t) {
    Var z = ag::sigmoid(ag::add(ag::row(zx, t), ag::matmul(h, cell.u_z)));
    Var r = ag::sigmoid(ag::add(ag::row(rx, t), ag::matmul(h, cell.u_r)));
    Var cand = ag::tanh(ag::add(ag::row(hx, t), ag::matmul(ag::hadamard(r, h), cell.u_h)));
    h = ag::add(ag::hadamard(ag::sub(ones, z), h), ag::hadamard(z, cand));
    states.push_back(h);
  }
  return ag::stack_rows(states);
}

Var dropout(const Var& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw config_error("dropout: rate " + std::to_string(rate) + " outside [0,1)");
  }
  if (!training || rate == 0.0) return x;
  double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask = Tensor::zeros(x->value.shape());
  for (double& m : mask.data()) m = rng.uniform01() < rate ? 0.0 : keep_scale;
  return ag::hadamard(x, ag::constant(std::move(mask)));
}

}  // namespace vqacoin::layers
