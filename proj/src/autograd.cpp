#include "vqacoin/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <utility>

#include "vqacoin/error.hpp"
#include "vqacoin/kernels.hpp"

namespace vqacoin::autograd {

namespace k = vqacoin::kernels;

Tensor& VarNode::ensure_grad() {
  if (!grad.defined()) grad = Tensor::zeros(value.shape());
  return grad;
}

void VarNode::zero_grad() {
  if (grad.defined()) grad.fill(0.0);
  grad_seen = false;
}

Var constant(Tensor v) {
  if (!v.defined()) throw contract_error("constant: undefined tensor");
  return std::make_shared<VarNode>(std::move(v), false);
}

Var param(Tensor v) {
  if (!v.defined()) throw contract_error("param: undefined tensor");
  return std::make_shared<VarNode>(std::move(v), true);
}

namespace {

thread_local GradTape* t_current = nullptr;

/// Gradient accumulator of v, allocated and marked touched.
Tensor& grad_buf(const Var& v) {
  Tensor& g = v->ensure_grad();
  v->grad_seen = true;
  return g;
}

void add_into(double* dst, const double* src, size_t n) {
  for (size_t i = 0; i < n; ++i) dst[i] += src[i];
}

// dst += g ∘ other
void fma_into(double* dst, const double* g, const double* other, size_t n) {
  for (size_t i = 0; i < n; ++i) dst[i] += g[i] * other[i];
}

Var finish(const char* op, Tensor value, bool rg, std::function<void(const Tensor&)> back) {
  if (!value.all_finite()) {
    throw numeric_error(std::string(op) + ": non-finite value in output " + value.shape_str());
  }
  Var out = std::make_shared<VarNode>(std::move(value), rg);
  if (rg) {
    if (GradTape* t = GradTape::current()) t->record(out, std::move(back));
  }
  return out;
}

void require_rank(const Var& v, size_t rank, const char* op) {
  if (v->value.rank() != rank) {
    throw dimension_error(std::string(op) + ": expected rank " + std::to_string(rank) +
                          ", got " + v->value.shape_str());
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value)) {
    throw dimension_error(std::string(op) + ": shape mismatch " + a->value.shape_str() +
                          " vs " + b->value.shape_str());
  }
}

Var elementwise_unary(const char* op, k::Unary kop, const Var& a,
                      std::function<void(const Tensor&, const Var&, const Var&)> back_fill) {
  size_t n = a->value.numel();
  Tensor out = Tensor::zeros(a->value.shape());
  k::unary(kop, a->value.ptr(), out.ptr(), n);
  Var o = std::make_shared<VarNode>(std::move(out), a->requires_grad);
  if (!o->value.all_finite()) {
    throw numeric_error(std::string(op) + ": non-finite value in output " + o->value.shape_str());
  }
  if (a->requires_grad) {
    if (GradTape* t = GradTape::current()) {
      t->record(o, [a, o, back_fill](const Tensor& g) { back_fill(g, a, o); });
    }
  }
  return o;
}

}  // namespace

GradTape::GradTape() : prev_(t_current) { t_current = this; }

GradTape::~GradTape() { t_current = prev_; }

GradTape* GradTape::current() { return t_current; }

void GradTape::record(Var out, std::function<void(const Tensor&)> back) {
  steps_.push_back(Step{std::move(out), std::move(back)});
}

void GradTape::backward(const Var& loss) {
  if (!loss) throw contract_error("backward: null loss");
  if (loss->value.numel() != 1) {
    throw contract_error("backward: loss must be scalar, got " + loss->value.shape_str());
  }
  grad_buf(loss).at(0) += 1.0;
  for (size_t i = steps_.size(); i-- > 0;) {
    Step& s = steps_[i];
    if (s.out->grad_seen) s.back(s.out->grad);
  }
}

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  size_t m = a->value.rows(), kk = a->value.cols(), n = b->value.cols();
  if (b->value.rows() != kk) {
    throw dimension_error("matmul: inner extents differ, " + a->value.shape_str() + " vs " +
                          b->value.shape_str());
  }
  Tensor out = Tensor::zeros({m, n});
  k::matmul(a->value.ptr(), b->value.ptr(), out.ptr(), m, kk, n);
  bool rg = a->requires_grad || b->requires_grad;
  return finish("matmul", std::move(out), rg, [a, b, m, kk, n](const Tensor& g) {
    if (a->requires_grad) {
      k::matmul_nt(g.ptr(), b->value.ptr(), grad_buf(a).ptr(), m, n, kk, /*acc=*/true);
    }
    if (b->requires_grad) {
      k::matmul_tn(a->value.ptr(), g.ptr(), grad_buf(b).ptr(), m, kk, n, /*acc=*/true);
    }
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  size_t m = a->value.rows(), n = a->value.cols(), p = b->value.rows();
  if (b->value.cols() != n) {
    throw dimension_error("matmul_nt: shared extent differs, " + a->value.shape_str() + " vs " +
                          b->value.shape_str());
  }
  Tensor out = Tensor::zeros({m, p});
  k::matmul_nt(a->value.ptr(), b->value.ptr(), out.ptr(), m, n, p);
  bool rg = a->requires_grad || b->requires_grad;
  return finish("matmul_nt", std::move(out), rg, [a, b, m, n, p](const Tensor& g) {
    if (a->requires_grad) {
      k::matmul(g.ptr(), b->value.ptr(), grad_buf(a).ptr(), m, p, n, /*acc=*/true);
    }
    if (b->requires_grad) {
      k::matmul_tn(g.ptr(), a->value.ptr(), grad_buf(b).ptr(), m, p, n, /*acc=*/true);
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  size_t n = a->value.numel();
  Tensor out = Tensor::zeros(a->value.shape());
  k::binary(k::Binary::add, a->value.ptr(), b->value.ptr(), out.ptr(), n);
  bool rg = a->requires_grad || b->requires_grad;
  return finish("add", std::move(out), rg, [a, b, n](const Tensor& g) {
    if (a->requires_grad) add_into(grad_buf(a).ptr(), g.ptr(), n);
    if (b->requires_grad) add_into(grad_buf(b).ptr(), g.ptr(), n);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  size_t n = a->value.numel();
  Tensor out = Tensor::zeros(a->value.shape());
  k::binary(k::Binary::sub, a->value.ptr(), b->value.ptr(), out.ptr(), n);
  bool rg = a->requires_grad || b->requires_grad;
  return finish("sub", std::move(out), rg, [a, b, n](const Tensor& g) {
    if (a->requires_grad) add_into(grad_buf(a).ptr(), g.ptr(), n);
    if (b->requires_grad) {
      double* db = grad_buf(b).ptr();
      const double* gp = g.ptr();
      for (size_t i = 0; i < n; ++i) db[i] -= gp[i];
    }
  });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape(a, b, "hadamard");
  size_t n = a->value.numel();
  Tensor out = Tensor::zeros(a->value.shape());
  k::binary(k::Binary::mul, a->value.ptr(), b->value.ptr(), out.ptr(), n);
  bool rg = a->requires_grad || b->requires_grad;
  return finish("hadamard", std::move(out), rg, [a, b, n](const Tensor& g) {
    if (a->requires_grad) fma_into(grad_buf(a).ptr(), g.ptr(), b->value.ptr(), n);
    if (b->requires_grad) fma_into(grad_buf(b).ptr(), g.ptr(), a->value.ptr(), n);
  });
}

Var scale(const Var& a, double c) {
  size_t n = a->value.numel();
  Tensor out = Tensor::zeros(a->value.shape());
  k::scale(a->value.ptr(), out.ptr(), n, c);
  return finish("scale", std::move(out), a->requires_grad, [a, c, n](const Tensor& g) {
    if (!a->requires_grad) return;
    double* da = grad_buf(a).ptr();
    const double* gp = g.ptr();
    for (size_t i = 0; i < n; ++i) da[i] += c * gp[i];
  });
}

Var relu(const Var& a) {
  return elementwise_unary("relu", k::Unary::relu, a,
                           [](const Tensor& g, const Var& a_, const Var&) {
                             size_t n = g.numel();
                             double* da = grad_buf(a_).ptr();
                             const double* x = a_->value.ptr();
                             const double* gp = g.ptr();
                             for (size_t i = 0; i < n; ++i) {
                               if (x[i] > 0.0) da[i] += gp[i];
                             }
                           });
}

Var sigmoid(const Var& a) {
  return elementwise_unary("sigmoid", k::Unary::sigmoid, a,
                           [](const Tensor& g, const Var& a_, const Var& o_) {
                             size_t n = g.numel();
                             double* da = grad_buf(a_).ptr();
                             const double* y = o_->value.ptr();
                             const double* gp = g.ptr();
                             for (size_t i = 0; i < n; ++i) da[i] += gp[i] * y[i] * (1.0 - y[i]);
                           });
}

Var tanh(const Var& a) {
  return elementwise_unary("tanh", k::Unary::tanh, a,
                           [](const Tensor& g, const Var& a_, const Var& o_) {
                             size_t n = g.numel();
                             double* da = grad_buf(a_).ptr();
                             const double* y = o_->value.ptr();
                             const double* gp = g.ptr();
                             for (size_t i = 0; i < n; ++i) da[i] += gp[i] * (1.0 - y[i] * y[i]);
                           });
}

Var log(const Var& a) {
  return elementwise_unary("log", k::Unary::log, a,
                           [](const Tensor& g, const Var& a_, const Var&) {
                             size_t n = g.numel();
                             double* da = grad_buf(a_).ptr();
                             const double* x = a_->value.ptr();
                             const double* gp = g.ptr();
                             for (size_t i = 0; i < n; ++i) da[i] += gp[i] / x[i];
                           });
}

Var sqrt(const Var& a) {
  return elementwise_unary("sqrt", k::Unary::sqrt, a,
                           [](const Tensor& g, const Var& a_, const Var& o_) {
                             size_t n = g.numel();
                             double* da = grad_buf(a_).ptr();
                             const double* y = o_->value.ptr();
                             const double* gp = g.ptr();
                             for (size_t i = 0; i < n; ++i) da[i] += gp[i] * 0.5 / y[i];
                           });
}

Var recip(const Var& a) {
  return elementwise_unary("recip", k::Unary::recip, a,
                           [](const Tensor& g, const Var& a_, const Var& o_) {
                             size_t n = g.numel();
                             double* da = grad_buf(a_).ptr();
                             const double* y = o_->value.ptr();
                             const double* gp = g.ptr();
                             for (size_t i = 0; i < n; ++i) da[i] -= gp[i] * y[i] * y[i];
                           });
}

namespace {

struct SliceLayout {
  size_t n_slices, len, elem_stride, slice_stride;
};

SliceLayout slice_layout(const Tensor& x, size_t axis, const char* op) {
  if (x.rank() == 1) {
    if (axis != 0) throw dimension_error(std::string(op) + ": axis 1 invalid for " + x.shape_str());
    return {1, x.numel(), 1, 0};
  }
  if (x.rank() == 2) {
    if (axis == 0) return {x.cols(), x.rows(), x.cols(), 1};
    if (axis == 1) return {x.rows(), x.cols(), 1, x.cols()};
    throw dimension_error(std::string(op) + ": axis " + std::to_string(axis) + " invalid for " +
                          x.shape_str());
  }
  throw dimension_error(std::string(op) + ": expected rank 1 or 2, got " + x.shape_str());
}

}  // namespace

Var softmax(const Var& x, size_t axis) {
  SliceLayout L = slice_layout(x->value, axis, "softmax");
  // Degenerate-mask scan: every slice needs at least one live entry.
  for (size_t s = 0; s < L.n_slices; ++s) {
    const double* base = x->value.ptr() + s * L.slice_stride;
    bool live = false;
    for (size_t i = 0; i < L.len && !live; ++i) {
      live = base[i * L.elem_stride] > k::kMaskThreshold;
    }
    if (!live) {
      throw mask_error("softmax: all " + std::to_string(L.len) + " positions masked in slice " +
                       std::to_string(s));
    }
  }
  Tensor out = Tensor::zeros(x->value.shape());
  k::softmax_slices(x->value.ptr(), out.ptr(), L.n_slices, L.len, L.elem_stride, L.slice_stride);
  if (!out.all_finite()) throw numeric_error("softmax: non-finite value in output " + out.shape_str());
  Var o = std::make_shared<VarNode>(std::move(out), x->requires_grad);
  if (x->requires_grad) {
    if (GradTape* t = GradTape::current()) {
      // dx_i = y_i·(g_i − Σ_j g_j·y_j) per slice; masked positions have
      // y = 0 and so receive exactly zero gradient.
      t->record(o, [x, o, L](const Tensor& g) {
        double* dx = grad_buf(x).ptr();
        const double* y = o->value.ptr();
        const double* gp = g.ptr();
        for (size_t s = 0; s < L.n_slices; ++s) {
          size_t base = s * L.slice_stride;
          double dot = 0;
          for (size_t i = 0; i < L.len; ++i) {
            size_t idx = base + i * L.elem_stride;
            dot += gp[idx] * y[idx];
          }
          for (size_t i = 0; i < L.len; ++i) {
            size_t idx = base + i * L.elem_stride;
            dx[idx] += y[idx] * (gp[idx] - dot);
          }
        }
      });
    }
  }
  return o;
}

Var reduce_sum(const Var& x, size_t axis) {
  require_rank(x, 2, "reduce_sum");
  size_t rows = x->value.rows(), cols = x->value.cols();
  if (axis > 1) {
    throw dimension_error("reduce_sum: axis " + std::to_string(axis) + " invalid for " +
                          x->value.shape_str());
  }
  size_t out_len = axis == 0 ? cols : rows;
  Tensor out = Tensor::zeros({out_len});
  if (axis == 0) {
    k::reduce_slices(x->value.ptr(), out.ptr(), cols, rows, cols, 1);
  } else {
    k::reduce_slices(x->value.ptr(), out.ptr(), rows, cols, 1, cols);
  }
  return finish("reduce_sum", std::move(out), x->requires_grad, [x, rows, cols, axis](const Tensor& g) {
    if (!x->requires_grad) return;
    double* dx = grad_buf(x).ptr();
    const double* gp = g.ptr();
    for (size_t i = 0; i < rows; ++i) {
      for (size_t j = 0; j < cols; ++j) dx[i * cols + j] += gp[axis == 0 ? j : i];
    }
  });
}

Var sum_all(const Var& x) {
  Tensor out = Tensor::scalar(k::sum(x->value.ptr(), x->value.numel()));
  size_t n = x->value.numel();
  return finish("sum_all", std::move(out), x->requires_grad, [x, n](const Tensor& g) {
    if (!x->requires_grad) return;
    double* dx = grad_buf(x).ptr();
    double gv = g.at(0);
    for (size_t i = 0; i < n; ++i) dx[i] += gv;
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw contract_error("concat: no parts");
  size_t total = 0;
  bool rg = false;
  for (const Var& p : parts) {
    require_rank(p, 1, "concat");
    total += p->value.numel();
    rg = rg || p->requires_grad;
  }
  Tensor out = Tensor::zeros({total});
  size_t off = 0;
  for (const Var& p : parts) {
    std::memcpy(out.ptr() + off, p->value.ptr(), p->value.numel() * sizeof(double));
    off += p->value.numel();
  }
  std::vector<Var> held = parts;
  return finish("concat", std::move(out), rg, [held](const Tensor& g) {
    size_t off2 = 0;
    for (const Var& p : held) {
      size_t n = p->value.numel();
      if (p->requires_grad) add_into(grad_buf(p).ptr(), g.ptr() + off2, n);
      off2 += n;
    }
  });
}

Var broadcast_add(const Var& a, const Var& v) {
  require_rank(a, 2, "broadcast_add");
  require_rank(v, 1, "broadcast_add");
  size_t rows = a->value.rows(), cols = a->value.cols();
  if (v->value.numel() != cols) {
    throw dimension_error("broadcast_add: row length mismatch, " + a->value.shape_str() + " vs " +
                          v->value.shape_str());
  }
  Tensor out = Tensor::zeros({rows, cols});
  const double* ap = a->value.ptr();
  const double* vp = v->value.ptr();
  double* op = out.ptr();
  for (size_t i = 0; i < rows; ++i) {
    for (size_t j = 0; j < cols; ++j) op[i * cols + j] = ap[i * cols + j] + vp[j];
  }
  bool rg = a->requires_grad || v->requires_grad;
  return finish("broadcast_add", std::move(out), rg, [a, v, rows, cols](const Tensor& g) {
    if (a->requires_grad) add_into(grad_buf(a).ptr(), g.ptr(), rows * cols);
    if (v->requires_grad) {
      double* dv = grad_buf(v).ptr();
      const double* gp = g.ptr();
      for (size_t i = 0; i < rows; ++i) {
        for (size_t j = 0; j < cols; ++j) dv[j] += gp[i * cols + j];
      }
    }
  });
}

Var broadcast_mul(const Var& a, const Var& v) {
  require_rank(a, 2, "broadcast_mul");
  require_rank(v, 1, "broadcast_mul");
  size_t rows = a->value.rows(), cols = a->value.cols();
  if (v->value.numel() != cols) {
    throw dimension_error("broadcast_mul: row length mismatch, " + a->value.shape_str() + " vs " +
                          v->value.shape_str());
  }
  Tensor out = Tensor::zeros({rows, cols});
  const double* ap = a->value.ptr();
  const double* vp = v->value.ptr();
  double* op = out.ptr();
  for (size_t i = 0; i < rows; ++i) {
    for (size_t j = 0; j < cols; ++j) op[i * cols + j] = ap[i * cols + j] * vp[j];
  }
  bool rg = a->requires_grad || v->requires_grad;
  return finish("broadcast_mul", std::move(out), rg, [a, v, rows, cols](const Tensor& g) {
    const double* gp = g.ptr();
    if (a->requires_grad) {
      double* da = grad_buf(a).ptr();
      const double* vp2 = v->value.ptr();
      for (size_t i = 0; i < rows; ++i) {
        for (size_t j = 0; j < cols; ++j) da[i * cols + j] += gp[i * cols + j] * vp2[j];
      }
    }
    if (v->requires_grad) {
      double* dv = grad_buf(v).ptr();
      const double* ap2 = a->value.ptr();
      for (size_t i = 0; i < rows; ++i) {
        for (size_t j = 0; j < cols; ++j) dv[j] += gp[i * cols + j] * ap2[i * cols + j];
      }
    }
  });
}

Var scale_rows(const Var& w, const Var& h) {
  require_rank(w, 1, "scale_rows");
  require_rank(h, 2, "scale_rows");
  size_t rows = h->value.rows(), cols = h->value.cols();
  if (w->value.numel() != rows) {
    throw dimension_error("scale_rows: weight length mismatch, " + w->value.shape_str() + " vs " +
                          h->value.shape_str());
  }
  Tensor out = Tensor::zeros({rows, cols});
  const double* wp = w->value.ptr();
  const double* hp = h->value.ptr();
  double* op = out.ptr();
  for (size_t i = 0; i < rows; ++i) {
    for (size_t j = 0; j < cols; ++j) op[i * cols + j] = wp[i] * hp[i * cols + j];
  }
  bool rg = w->requires_grad || h->requires_grad;
  return finish("scale_rows", std::move(out), rg, [w, h, rows, cols](const Tensor& g) {
    const double* gp = g.ptr();
    if (h->requires_grad) {
      double* dh = grad_buf(h).ptr();
      const double* wp2 = w->value.ptr();
      for (size_t i = 0; i < rows; ++i) {
        for (size_t j = 0; j < cols; ++j) dh[i * cols + j] += wp2[i] * gp[i * cols + j];
      }
    }
    if (w->requires_grad) {
      double* dw = grad_buf(w).ptr();
      const double* hp2 = h->value.ptr();
      for (size_t i = 0; i < rows; ++i) {
        double s = 0;
        for (size_t j = 0; j < cols; ++j) s += gp[i * cols + j] * hp2[i * cols + j];
        dw[i] += s;
      }
    }
  });
}

Var row(const Var& x, size_t i) {
  require_rank(x, 2, "row");
  size_t rows = x->value.rows(), cols = x->value.cols();
  if (i >= rows) {
    throw contract_error("row: index " + std::to_string(i) + " out of range for " +
                         x->value.shape_str());
  }
  Tensor out = Tensor::zeros({1, cols});
  std::memcpy(out.ptr(), x->value.ptr() + i * cols, cols * sizeof(double));
  return finish("row", std::move(out), x->requires_grad, [x, i, cols](const Tensor& g) {
    if (x->requires_grad) add_into(grad_buf(x).ptr() + i * cols, g.ptr(), cols);
  });
}

Var stack_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw contract_error("stack_rows: no parts");
  size_t d = parts[0]->value.numel();
  bool rg = false;
  for (const Var& p : parts) {
    if (p->value.rank() > 2 || p->value.numel() != d ||
        (p->value.rank() == 2 && p->value.rows() != 1)) {
      throw dimension_error("stack_rows: part shape " + p->value.shape_str() +
                            " is not a length-" + std::to_string(d) + " row");
    }
    rg = rg || p->requires_grad;
  }
  Tensor out = Tensor::zeros({parts.size(), d});
  for (size_t t = 0; t < parts.size(); ++t) {
    std::memcpy(out.ptr() + t * d, parts[t]->value.ptr(), d * sizeof(double));
  }
  std::vector<Var> held = parts;
  return finish("stack_rows", std::move(out), rg, [held, d](const Tensor& g) {
    for (size_t t = 0; t < held.size(); ++t) {
      if (held[t]->requires_grad) add_into(grad_buf(held[t]).ptr(), g.ptr() + t * d, d);
    }
  });
}

Var reshape(const Var& x, std::vector<size_t> shape) {
  size_t want = 1;
  for (size_t e : shape) want *= e;
  if (shape.empty() || want != x->value.numel()) {
    throw dimension_error("reshape: cannot view " + x->value.shape_str() + " as " +
                          shape_to_string(shape));
  }
  Tensor out = Tensor::from_data(std::move(shape),
                                 std::vector<double>(x->value.data().begin(), x->value.data().end()));
  size_t n = out.numel();
  return finish("reshape", std::move(out), x->requires_grad, [x, n](const Tensor& g) {
    if (x->requires_grad) add_into(grad_buf(x).ptr(), g.ptr(), n);
  });
}

Var embedding_rows(const Var& table, const std::vector<size_t>& ids, bool freeze_row0) {
  require_rank(table, 2, "embedding_rows");
  if (ids.empty()) throw contract_error("embedding_rows: empty id sequence");
  size_t vocab = table->value.rows(), dim = table->value.cols();
  for (size_t id : ids) {
    if (id >= vocab) {
      throw vocabulary_error("embedding_rows: token id " + std::to_string(id) +
                             " out of range (vocabulary size " + std::to_string(vocab) + ")");
    }
  }
  Tensor out = Tensor::zeros({ids.size(), dim});
  for (size_t t = 0; t < ids.size(); ++t) {
    std::memcpy(out.ptr() + t * dim, table->value.ptr() + ids[t] * dim, dim * sizeof(double));
  }
  std::vector<size_t> held = ids;
  return finish("embedding_rows", std::move(out), table->requires_grad,
                [table, held, dim, freeze_row0](const Tensor& g) {
                  if (!table->requires_grad) return;
                  double* dt = grad_buf(table).ptr();
                  for (size_t t = 0; t < held.size(); ++t) {
                    if (freeze_row0 && held[t] == 0) continue;
                    add_into(dt + held[t] * dim, g.ptr() + t * dim, dim);
                  }
                });
}

Var bce_with_logits_mean(const Var& logits, const Tensor& targets) {
  if (!logits->value.same_shape(targets)) {
    throw dimension_error("bce_with_logits_mean: shape mismatch " + logits->value.shape_str() +
                          " vs " + targets.shape_str());
  }
  size_t n = logits->value.numel();
  const double* lp = logits->value.ptr();
  const double* tp = targets.ptr();
  double total = 0;
  for (size_t i = 0; i < n; ++i) {
    double t = tp[i];
    if (!(t >= 0.0 && t <= 1.0)) {
      throw contract_error("bce_with_logits_mean: target " + std::to_string(t) +
                           " outside [0,1] at index " + std::to_string(i));
    }
    double l = lp[i];
    total += std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::abs(l)));
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(n));
  Tensor held = targets;
  return finish("bce_with_logits_mean", std::move(out), logits->requires_grad,
                [logits, held, n](const Tensor& g) {
                  if (!logits->requires_grad) return;
                  double* dl = grad_buf(logits).ptr();
                  const double* lp2 = logits->value.ptr();
                  const double* tp2 = held.ptr();
                  double gv = g.at(0) / static_cast<double>(n);
                  for (size_t i = 0; i < n; ++i) {
                    double s = 1.0 / (1.0 + std::exp(-lp2[i]));
                    dl[i] += gv * (s - tp2[i]);
                  }
                });
}

Var softmax_xent(const Var& logits, size_t target) {
  require_rank(logits, 1, "softmax_xent");
  size_t n = logits->value.numel();
  if (target >= n) {
    throw contract_error("softmax_xent: target class " + std::to_string(target) +
                         " out of range for " + std::to_string(n) + " classes");
  }
  const double* lp = logits->value.ptr();
  double mx = lp[0];
  for (size_t i = 1; i < n; ++i) mx = std::max(mx, lp[i]);
  double denom = 0;
  for (size_t i = 0; i < n; ++i) denom += std::exp(lp[i] - mx);
  double lse = mx + std::log(denom);
  Tensor out = Tensor::scalar(lse - lp[target]);
  return finish("softmax_xent", std::move(out), logits->requires_grad,
                [logits, target, n, mx, denom](const Tensor& g) {
                  if (!logits->requires_grad) return;
                  double* dl = grad_buf(logits).ptr();
                  const double* lp2 = logits->value.ptr();
                  double gv = g.at(0);
                  for (size_t i = 0; i < n; ++i) {
                    double p = std::exp(lp2[i] - mx) / denom;
                    dl[i] += gv * (p - (i == target ? 1.0 : 0.0));
                  }
                });
}

}  // namespace vqacoin::autograd
