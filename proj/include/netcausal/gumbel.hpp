#pragma once

#include <cmath>
#include <random>

#include "netcausal/common.hpp"

namespace netcausal {

inline double sample_gumbel(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(std::numeric_limits<double>::min(), 1.0);
  return -std::log(-std::log(u(rng)));
}

// Difference of two standard Gumbel draws per row, the noise feeding the
// two-class relaxation (the difference is Logistic(0, 1)).
inline Mat sample_gumbel_noise(int n, std::mt19937_64& rng) {
  Mat e(n, 1);
  for (int i = 0; i < n; ++i) {
    const double g1 = sample_gumbel(rng);
    const double g0 = sample_gumbel(rng);
    e(i, 0) = g1 - g0;
  }
  return e;
}

struct GumbelSample {
  double hard;
  double soft;
};

// Two-class Gumbel-softmax over {treat, control}: the hard value is the
// argmax, the soft value the relaxation gradients flow through.
inline GumbelSample gumbel_softmax_sample(double p, double tau,
                                          std::mt19937_64& rng) {
  if (tau <= 0.0) throw invalid_input("gumbel temperature must be positive");
  const double pc = std::min(1.0 - 1e-6, std::max(1e-6, p));
  const double z = std::log(pc / (1.0 - pc)) + sample_gumbel(rng) - sample_gumbel(rng);
  const double soft = 1.0 / (1.0 + std::exp(-z / tau));
  return {soft > 0.5 ? 1.0 : 0.0, soft};
}

}  // namespace netcausal
