#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "vqacoin/tensor.hpp"

namespace vqacoin::autograd {

/// A tensor participating in gradient tracking. Ops allocate fresh nodes;
/// parameters are long-lived nodes owned by layers.
struct VarNode {
  Tensor value;
  Tensor grad;  // lazily allocated; undefined means "all zeros so far"
  bool requires_grad = false;
  bool grad_seen = false;  // set once backward first writes into grad

  VarNode(Tensor v, bool rg) : value(std::move(v)), requires_grad(rg) {}

  /// Allocates the gradient accumulator (zeros) if not present yet.
  Tensor& ensure_grad();
  void zero_grad();
};

using Var = std::shared_ptr<VarNode>;

Var constant(Tensor v);
Var param(Tensor v);

/// Define-by-run tape. Constructing one makes it the ambient recorder for
/// the current thread (ops append their backward closures to it); the
/// destructor restores the previous recorder. Rebuilt for every forward
/// pass, so variable-length inputs need no graph surgery.
class GradTape {
 public:
  GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;
  ~GradTape();

  /// Runs the chain rule from `loss` (scalar) back through every recorded
  /// step in reverse execution order. Gradients accumulate additively
  /// across fan-out; steps whose output gradient was never touched are
  /// skipped, so parameters unreachable from the loss keep zero gradients.
  void backward(const Var& loss);

  size_t steps() const { return steps_.size(); }

  static GradTape* current();
  /// Appends a backward step; called by op implementations only.
  void record(Var out, std::function<void(const Tensor&)> back);

 private:
  struct Step {
    Var out;
    std::function<void(const Tensor&)> back;
  };
  std::vector<Step> steps_;
  GradTape* prev_;
};

// --- Operations -----------------------------------------------------------
// Every op validates shapes (dimension error naming both shapes), checks the
// forward result for NaN/Inf (numeric error; never propagated silently), and
// records its backward closure on the ambient tape when any input requires
// gradients.

/// c[m×n] = a[m×k] · b[k×n]
Var matmul(const Var& a, const Var& b);
/// c[m×p] = a[m×n] · b[p×n]ᵀ (rows-dot-rows form used by bilinear scoring)
Var matmul_nt(const Var& a, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double c);

Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var recip(const Var& a);

/// Softmax along `axis` of a rank-1 or rank-2 tensor, max-subtracted for
/// stability. Entries at or below the additive mask threshold
/// (kernels::kMaskThreshold) yield exactly 0; a slice with no live entry is
/// a degenerate-mask error.
Var softmax(const Var& x, size_t axis);

/// Sums a rank-2 tensor along `axis` (0: column sums, 1: row sums) into a
/// rank-1 result.
Var reduce_sum(const Var& x, size_t axis);
/// Sum of every entry, as a scalar.
Var sum_all(const Var& x);

/// Concatenates rank-1 parts into one vector.
Var concat(const std::vector<Var>& parts);

/// a[n×d] with v (length d) added to every row.
Var broadcast_add(const Var& a, const Var& v);
/// a[n×d] with every row multiplied elementwise by v (length d); equally,
/// column j scaled by v[j].
Var broadcast_mul(const Var& a, const Var& v);
/// out[i,:] = w[i] · h[i,:] with w rank-1 of length n, h[n×d].
Var scale_rows(const Var& w, const Var& h);

/// Row i of a matrix, kept as a 1×cols matrix.
Var row(const Var& x, size_t i);
/// Stacks parts (each 1×d or length-d) into a [parts×d] matrix.
Var stack_rows(const std::vector<Var>& parts);
/// Same data, new shape (numel must match).
Var reshape(const Var& x, std::vector<size_t> shape);

/// Gathers rows `ids` of `table` into a [len×dim] matrix. With freeze_row0,
/// row 0 (the padding row) receives no gradient.
Var embedding_rows(const Var& table, const std::vector<size_t>& ids, bool freeze_row0);

/// Mean over classes of binary cross-entropy between sigmoid(logits) and
/// soft targets in [0,1], computed in the numerically stable logit form.
Var bce_with_logits_mean(const Var& logits, const Tensor& targets);
/// −log softmax(logits)[target], fused for stability.
Var softmax_xent(const Var& logits, size_t target);

}  // namespace vqacoin::autograd
