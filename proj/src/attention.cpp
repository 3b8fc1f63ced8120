#include "vqacoin/attention.hpp"

#include "vqacoin/error.hpp"
#include "vqacoin/kernels.hpp"

namespace vqacoin::attention {

namespace ag = vqacoin::autograd;
namespace k = vqacoin::kernels;

namespace {

// live masks are strictly 0/1; anything else is a caller bug, not a degree
// of liveness
void check_live(const Tensor& live, size_t expected, const char* what) {
  if (!live.defined()) return;
  if (live.numel() != expected) {
    throw dimension_error(std::string(what) + " live mask has " + std::to_string(live.numel()) +
                          " entries, expected " + std::to_string(expected));
  }
  for (size_t i = 0; i < live.numel(); ++i) {
    if (live.at(i) != 0.0 && live.at(i) != 1.0) {
      throw contract_error(std::string(what) + " live mask entry " + std::to_string(i) +
                           " is not 0 or 1");
    }
  }
}

}  // namespace

Tensor additive_mask_vector(const Tensor& live) {
  check_live(live, live.numel(), "attention");
  Tensor out = Tensor::zeros(live.shape());
  for (size_t i = 0; i < live.numel(); ++i) {
    out.at(i) = live.at(i) != 0.0 ? 0.0 : k::kMaskSentinel;
  }
  return out;
}

Tensor additive_pair_mask(const Tensor& live_x, size_t n, const Tensor& live_y, size_t m) {
  check_live(live_x, n, "row");
  check_live(live_y, m, "column");
  Tensor out = Tensor::zeros({n, m});
  for (size_t i = 0; i < n; ++i) {
    bool xi = !live_x.defined() || live_x.at(i) != 0.0;
    for (size_t j = 0; j < m; ++j) {
      bool yj = !live_y.defined() || live_y.at(j) != 0.0;
      out.at(i, j) = xi && yj ? 0.0 : k::kMaskSentinel;
    }
  }
  return out;
}

SelfAttentionHead SelfAttentionHead::init(size_t d, Rng& rng) {
  SelfAttentionHead h;
  h.d = d;
  h.fc_q = layers::WeightNormLinear::init(d, d, rng);
  h.fc_v = layers::WeightNormLinear::init(d, d, rng);
  h.fc_score = layers::Linear::init(d, 1, rng);
  return h;
}

void SelfAttentionHead::collect(const std::string& prefix,
                                std::vector<layers::NamedParam>& out) const {
  fc_q.collect(prefix + ".fc_q", out);
  fc_v.collect(prefix + ".fc_v", out);
  fc_score.collect(prefix + ".fc_score", out);
}

SelfAttentionResult self_attend(const SelfAttentionHead& head, const Var& h, const Tensor& live) {
  if (h->value.rank() != 2 || h->value.cols() != head.d) {
    throw dimension_error("self_attend: input " + h->value.shape_str() + " vs width " +
                          std::to_string(head.d));
  }
  size_t n = h->value.rows();
  if (live.defined() && live.numel() != n) {
    throw dimension_error("self_attend: mask " + live.shape_str() + " vs " + h->value.shape_str());
  }
  Var q = ag::relu(head.fc_q.forward(h));
  Var v = ag::relu(head.fc_v.forward(h));
  Var y = ag::hadamard(q, v);
  Var scores = ag::reshape(head.fc_score.forward(ag::relu(y)), {n});
  if (live.defined()) {
    scores = ag::add(scores, ag::constant(additive_mask_vector(live)));
  }
  Var w = ag::softmax(scores, 0);
  return {ag::scale_rows(w, h), w};
}

BilinearGlimpse BilinearGlimpse::init(size_t d_x, size_t d_y, size_t d_h, size_t d_out, Rng& rng) {
  BilinearGlimpse g;
  g.d_x = d_x;
  g.d_y = d_y;
  g.d_h = d_h;
  g.d_out = d_out;
  g.u = ag::param(layers::glorot_uniform(d_x, d_h, rng));
  g.v = ag::param(layers::glorot_uniform(d_y, d_h, rng));
  Tensor pt = layers::glorot_uniform(d_h, 1, rng);
  g.p = ag::param(Tensor::from_data({d_h}, std::vector<double>(pt.data().begin(), pt.data().end())));
  g.u2 = ag::param(layers::glorot_uniform(d_x, d_out, rng));
  g.v2 = ag::param(layers::glorot_uniform(d_y, d_out, rng));
  return g;
}

void BilinearGlimpse::collect(const std::string& prefix,
                              std::vector<layers::NamedParam>& out) const {
  out.push_back({prefix + ".u", u});
  out.push_back({prefix + ".v", v});
  out.push_back({prefix + ".p", p});
  out.push_back({prefix + ".u2", u2});
  out.push_back({prefix + ".v2", v2});
}

BilinearResult bilinear_attend(const BilinearGlimpse& g, const Var& x, const Var& y,
                               const Tensor& live_x, const Tensor& live_y) {
  if (x->value.rank() != 2 || x->value.cols() != g.d_x) {
    throw dimension_error("bilinear_attend: x " + x->value.shape_str() + " vs d_x " +
                          std::to_string(g.d_x));
  }
  if (y->value.rank() != 2 || y->value.cols() != g.d_y) {
    throw dimension_error("bilinear_attend: y " + y->value.shape_str() + " vs d_y " +
                          std::to_string(g.d_y));
  }
  size_t n = x->value.rows(), m = y->value.rows();
  if (live_x.defined() && live_x.numel() != n) {
    throw dimension_error("bilinear_attend: x mask " + live_x.shape_str() + " vs " +
                          x->value.shape_str());
  }
  if (live_y.defined() && live_y.numel() != m) {
    throw dimension_error("bilinear_attend: y mask " + live_y.shape_str() + " vs " +
                          y->value.shape_str());
  }

  Var ax = ag::relu(ag::matmul(x, g.u));
  Var by = ag::relu(ag::matmul(y, g.v));
  Var logits = ag::matmul_nt(ag::broadcast_mul(ax, g.p), by);
  if (live_x.defined() || live_y.defined()) {
    logits = ag::add(logits, ag::constant(additive_pair_mask(live_x, n, live_y, m)));
  }
  Var map = ag::reshape(ag::softmax(ag::reshape(logits, {n * m}), 0), {n, m});

  Var a2 = ag::relu(ag::matmul(x, g.u2));
  Var b2 = ag::relu(ag::matmul(y, g.v2));
  Var joint = ag::reduce_sum(ag::hadamard(a2, ag::matmul(map, b2)), 0);
  return {joint, map};
}

GlimpseStackResult glimpse_stack(const std::vector<BilinearGlimpse>& glimpses, const Var& x,
                                 const Var& q0, const Tensor& live_x, const Tensor& live_q) {
  if (glimpses.empty()) throw contract_error("glimpse_stack: no glimpses");
  GlimpseStackResult r;
  r.maps.reserve(glimpses.size());
  Var q = q0;
  for (const BilinearGlimpse& g : glimpses) {
    BilinearResult step = bilinear_attend(g, x, q, live_x, live_q);
    q = ag::broadcast_add(q, step.joint);
    r.maps.push_back(step.map);
  }
  r.q_final = q;
  return r;
}

SiBranchResult si_branch(const BilinearGlimpse& g, const Var& s, const Var& c,
                         const Tensor& live_s, const Tensor& live_c) {
  if (g.d_out != c->value.cols()) {
    throw dimension_error("si_branch: glimpse d_out " + std::to_string(g.d_out) +
                          " vs context " + c->value.shape_str());
  }
  BilinearResult step = bilinear_attend(g, s, c, live_s, live_c);
  return {ag::broadcast_add(c, step.joint), step.map};
}

}  // namespace vqacoin::attention
