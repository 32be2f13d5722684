#pragma once

#include <vector>

#include "netcausal/common.hpp"
#include "netcausal/tape.hpp"

namespace netcausal {

// Compares tape adjoints against central finite differences over every
// parameter entry. The loss builder must be deterministic (dropout off,
// frozen noise). Errors are normalized by max(1, |analytic|, |numeric|).
template <typename LossFn>
double grad_check(LossFn&& build_loss, const std::vector<Var>& params,
                  double h = 1e-5) {
  zero_grad(params);
  {
    Tape tape;
    Var loss = build_loss(tape);
    if (!loss->value.allFinite()) throw numeric_error("grad_check: non-finite loss");
    tape.backward(loss);
  }
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p->grad);

  auto eval = [&]() {
    Tape tape;
    Var loss = build_loss(tape);
    return loss->value(0, 0);
  };

  double max_rel = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    for (int i = 0; i < p->value.rows(); ++i)
      for (int j = 0; j < p->value.cols(); ++j) {
        const double orig = p->value(i, j);
        p->value(i, j) = orig + h;
        const double fp = eval();
        p->value(i, j) = orig - h;
        const double fm = eval();
        p->value(i, j) = orig;
        const double fd = (fp - fm) / (2.0 * h);
        const double a = analytic[pi](i, j);
        const double rel =
            std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
        max_rel = std::max(max_rel, rel);
      }
  }
  return max_rel;
}

}  // namespace netcausal
