#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fd_check.hpp"
#include "vqacoin/autograd.hpp"
#include "vqacoin/error.hpp"
#include "vqacoin/layers.hpp"
#include "vqacoin/rng.hpp"
#include "vqacoin/tensor.hpp"

using namespace vqacoin;
using namespace vqacoin::layers;
namespace ag = vqacoin::autograd;

namespace {

GruCell zero_cell(size_t in, size_t hidden) {
  GruCell c;
  c.input_dim = in;
  c.hidden_dim = hidden;
  auto zm = [&](size_t r, size_t k) { return ag::param(Tensor::zeros({r, k})); };
  auto zv = [&](size_t k) { return ag::param(Tensor::zeros({k})); };
  c.w_z = zm(in, hidden); c.u_z = zm(hidden, hidden); c.b_z = zv(hidden);
  c.w_r = zm(in, hidden); c.u_r = zm(hidden, hidden); c.b_r = zv(hidden);
  c.w_h = zm(in, hidden); c.u_h = zm(hidden, hidden); c.b_h = zv(hidden);
  return c;
}

}  // namespace

TEST_CASE("glorot init stays inside the fan bound") {
  Rng rng(5);
  Tensor w = glorot_uniform(30, 50, rng);
  CHECK(w.rows() == 30);
  CHECK(w.cols() == 50);
  double bound = std::sqrt(6.0 / (30 + 50));
  double lo = 0, hi = 0;
  for (double v : w.data()) {
    CHECK(std::abs(v) <= bound);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // the draw actually spreads over the interval
  CHECK(lo < -0.5 * bound);
  CHECK(hi > 0.5 * bound);
}

TEST_CASE("orthogonal init satisfies Q^T Q = I") {
  Rng rng(11);
  Tensor q = orthogonal(16, rng);
  for (size_t i = 0; i < 16; ++i) {
    for (size_t j = 0; j < 16; ++j) {
      double dot = 0;
      for (size_t k = 0; k < 16; ++k) dot += q.at(k, i) * q.at(k, j);
      CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("embedding table: zero pad row, gather, range check") {
  Rng rng(3);
  EmbeddingTable t = EmbeddingTable::init(6, 4, rng);
  for (size_t j = 0; j < 4; ++j) CHECK(t.table->value.at(0, j) == 0.0);
  Var rows = t.lookup({0, 3, 3});
  CHECK(rows->value.rows() == 3);
  CHECK(rows->value.at(0, 2) == 0.0);
  CHECK(rows->value.at(1, 1) == rows->value.at(2, 1));
  CHECK_THROWS_AS(t.lookup({6}), Error);
}

TEST_CASE("embedding file loader writes resolved rows only") {
  Rng rng(9);
  EmbeddingTable t = EmbeddingTable::init(4, 2, rng);
  Tensor before = t.table->value;
  std::istringstream in(
      "apple 1.5 -2.5\n"
      "mystery 9 9\n"
      "\n"
      "banana 3.25 4.75\n"
      "pad 0 0\n");
  auto resolve = [](const std::string& w) -> long long {
    if (w == "apple") return 1;
    if (w == "banana") return 2;
    if (w == "pad") return 0;
    return -1;
  };
  CHECK(load_embedding_file(t, in, resolve) == 2);
  CHECK(t.table->value.at(1, 0) == 1.5);
  CHECK(t.table->value.at(2, 1) == 4.75);
  // unknown word keeps its random init, pad row stays zeros
  CHECK(t.table->value.at(3, 0) == before.at(3, 0));
  CHECK(t.table->value.at(0, 0) == 0.0);

  std::istringstream bad("apple 1.0\n");
  try {
    load_embedding_file(t, bad, resolve);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("weight-norm linear: effective column norms equal the gains") {
  Rng rng(23);
  WeightNormLinear fc = WeightNormLinear::init(5, 3, rng);
  // init pins gains to the raw column norms
  Tensor w0 = fc.effective_weight()->value;
  for (size_t j = 0; j < 3; ++j) {
    double norm = 0;
    for (size_t i = 0; i < 5; ++i) norm += w0.at(i, j) * w0.at(i, j);
    CHECK(std::sqrt(norm) == doctest::Approx(fc.gain->value.at(j)).epsilon(1e-12));
  }
  // scaling a direction column leaves the effective weight invariant
  for (size_t i = 0; i < 5; ++i) fc.direction->value.at(i, 1) *= 7.5;
  Tensor w1 = fc.effective_weight()->value;
  for (size_t i = 0; i < 5; ++i) {
    CHECK(w1.at(i, 1) == doctest::Approx(w0.at(i, 1)).epsilon(1e-12));
  }
}

TEST_CASE("weight-norm linear forward and gradients") {
  Rng rng(31);
  WeightNormLinear fc = WeightNormLinear::init(4, 3, rng);
  Tensor x0 = Tensor::zeros({2, 4});
  for (double& v : x0.data()) v = rng.uniform(-1, 1);
  Var x = ag::param(x0);
  Var y = fc.forward(x);
  CHECK(y->value.rows() == 2);
  CHECK(y->value.cols() == 3);
  fd::check_gradients({fc.direction, fc.gain, fc.bias, x}, [&] {
    Var o = fc.forward(x);
    return ag::sum_all(ag::hadamard(o, o));
  });
}

TEST_CASE("plain linear layer") {
  Rng rng(37);
  Linear fc = Linear::init(3, 2, rng);
  Var x = ag::constant(Tensor::matrix(1, 3, {1, 0, 0}));
  Var y = fc.forward(x);
  CHECK(y->value.at(0, 0) ==
        doctest::Approx(fc.weight->value.at(0, 0) + fc.bias->value.at(0)).epsilon(1e-15));
  std::vector<NamedParam> ps;
  fc.collect("cls_out", ps);
  REQUIRE(ps.size() == 2);
  CHECK(ps[0].name == "cls_out.weight");
  CHECK(ps[1].name == "cls_out.bias");
}

TEST_CASE("gru with zero parameters halves the carried state each step") {
  GruCell c = zero_cell(2, 1);
  Var inputs = ag::constant(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  Var states = gru_scan(c, inputs, Tensor::vector({0.7}));
  // z = sigmoid(0) = 1/2 and cand = tanh(0) = 0, so h halves exactly
  CHECK(states->value.at(0, 0) == 0.35);
  CHECK(states->value.at(1, 0) == 0.175);
  CHECK(states->value.at(2, 0) == 0.0875);
}

TEST_CASE("gru states over a prefix do not depend on the suffix") {
  Rng rng(41);
  GruCell c = GruCell::init(3, 4, rng);
  Tensor full = Tensor::zeros({6, 3});
  for (double& v : full.data()) v = rng.uniform(-1, 1);
  Tensor prefix = Tensor::zeros({4, 3});
  for (size_t i = 0; i < 4; ++i) {
    for (size_t j = 0; j < 3; ++j) prefix.at(i, j) = full.at(i, j);
  }
  Var sf = gru_scan(c, ag::constant(full));
  Var sp = gru_scan(c, ag::constant(prefix));
  for (size_t i = 0; i < 4; ++i) {
    for (size_t j = 0; j < 4; ++j) CHECK(sf->value.at(i, j) == sp->value.at(i, j));
  }
}

TEST_CASE("gru scan validates input width and h0 length") {
  Rng rng(43);
  GruCell c = GruCell::init(3, 4, rng);
  CHECK_THROWS_AS(gru_scan(c, ag::constant(Tensor::matrix(2, 2, {1, 2, 3, 4}))), Error);
  CHECK_THROWS_AS(
      gru_scan(c, ag::constant(Tensor::matrix(1, 3, {1, 2, 3})), Tensor::vector({1, 2})), Error);
}

TEST_CASE("gru gradients flow through the recurrence") {
  Rng rng(47);
  GruCell c = GruCell::init(2, 3, rng);
  Tensor x0 = Tensor::zeros({3, 2});
  for (double& v : x0.data()) v = rng.uniform(-1, 1);
  Var x = ag::param(x0);
  std::vector<Var> leaves = {x, c.w_z, c.u_z, c.b_z, c.w_h, c.u_h, c.b_h};
  fd::check_gradients(leaves, [&] {
    Var s = gru_scan(c, x);
    return ag::sum_all(ag::hadamard(s, s));
  });
}

TEST_CASE("dropout keeps rate, scale, and eval identity") {
  Tensor ones = Tensor::full({10000}, 1.0);
  Var x = ag::constant(ones);
  Rng rng(53);
  Var y = dropout(x, 0.5, /*training=*/true, rng);
  size_t kept = 0;
  for (size_t i = 0; i < 10000; ++i) {
    double v = y->value.at(i);
    CHECK((v == 0.0 || v == 2.0));
    if (v != 0.0) ++kept;
  }
  CHECK(kept > 4700);
  CHECK(kept < 5300);

  Var e = dropout(x, 0.5, /*training=*/false, rng);
  CHECK(e.get() == x.get());
  Var z = dropout(x, 0.0, /*training=*/true, rng);
  CHECK(z.get() == x.get());
  CHECK_THROWS_AS(dropout(x, 1.0, true, rng), Error);
  CHECK_THROWS_AS(dropout(x, -0.1, true, rng), Error);
}
