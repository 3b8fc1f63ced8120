#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "vqacoin/autograd.hpp"
#include "vqacoin/tensor.hpp"

namespace fd {

using vqacoin::Tensor;
using vqacoin::autograd::GradTape;
using vqacoin::autograd::Var;

struct FdStats {
  double max_rel_err = 0.0;
  size_t checked = 0;
};

/// Central-difference check of d(loss)/d(leaf) for every entry of every
/// leaf. `build` must rebuild the scalar loss from the leaves' current
/// values each call (outside a tape it is a pure forward pass). The
/// relative error denominator is floored at 1, so near-zero gradients are
/// compared absolutely.
inline FdStats check_gradients(const std::vector<Var>& leaves, const std::function<Var()>& build,
                               double step = 1e-5, double tol = 1e-4) {
  std::vector<Tensor> analytic;
  {
    GradTape tape;
    Var loss = build();
    for (const Var& l : leaves) l->zero_grad();
    tape.backward(loss);
  }
  for (const Var& l : leaves)
    analytic.push_back(l->grad_seen ? l->grad : Tensor::zeros(l->value.shape()));

  FdStats stats;
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto data = leaves[li]->value.data();
    for (size_t i = 0; i < data.size(); ++i) {
      double orig = data[i];
      data[i] = orig + step;
      double up = build()->value.at(0);
      data[i] = orig - step;
      double down = build()->value.at(0);
      data[i] = orig;
      double numeric = (up - down) / (2.0 * step);
      double exact = analytic[li].data()[i];
      double denom = std::max({std::fabs(numeric), std::fabs(exact), 1.0});
      double rel = std::fabs(numeric - exact) / denom;
      stats.max_rel_err = std::max(stats.max_rel_err, rel);
      ++stats.checked;
      INFO("leaf ", li, " entry ", i, ": analytic ", exact, ", finite-difference ", numeric);
      CHECK(rel <= tol);
    }
  }
  return stats;
}

}  // namespace fd
