#pragma once

#include <vector>

#include "netcausal/common.hpp"
#include "netcausal/tape.hpp"

namespace netcausal {

struct AdamState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  long t = 0;
};

// Bias-corrected Adam with decoupled weight decay: params shrink by
// (1 - lr*wd) before the moment update is applied.
inline void adam_step(const std::vector<Var>& params, AdamState& st, double lr,
                      double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8, double weight_decay = 0.0) {
  if (lr <= 0.0) throw invalid_input("adam: lr must be positive");
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      st.v.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (st.m.size() != params.size())
    throw invalid_input("adam: state/param count mismatch");
  ++st.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    p->ensure_grad();
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols())
      throw invalid_input("adam: grad/param shape mismatch");
    if (weight_decay != 0.0) p->value *= (1.0 - lr * weight_decay);
    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * p->grad;
    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * p->grad.cwiseProduct(p->grad);
    Mat mhat = st.m[i] / bc1;
    Mat vhat = st.v[i] / bc2;
    p->value.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
  }
}

}  // namespace netcausal
