#pragma once

#include <random>
#include <string>
#include <vector>

#include "netcausal/common.hpp"
#include "netcausal/graph.hpp"
#include "netcausal/tape.hpp"

namespace netcausal {

// Glorot uniform: U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))).
inline Mat glorot_uniform(int fan_in, int fan_out, std::mt19937_64& rng) {
  const double lim = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-lim, lim);
  Mat w(fan_in, fan_out);
  for (int i = 0; i < fan_in; ++i)
    for (int j = 0; j < fan_out; ++j) w(i, j) = u(rng);
  return w;
}

struct DenseLayer {
  Var W;
  Var b;
};

inline DenseLayer make_dense(int in, int out, std::mt19937_64& rng) {
  return {make_var(glorot_uniform(in, out, rng), true),
          make_var(Mat::Zero(1, out), true)};
}

inline Var dense_forward(Tape& tape, const DenseLayer& d, const Var& x) {
  return tape.add_rowvec(tape.matmul(x, d.W), d.b);
}

struct Mlp {
  std::vector<DenseLayer> layers;

  std::vector<Var> params() const {
    std::vector<Var> out;
    for (const auto& l : layers) {
      out.push_back(l.W);
      out.push_back(l.b);
    }
    return out;
  }
};

// dims = {in, h1, ..., out}.
inline Mlp make_mlp(const std::vector<int>& dims, std::mt19937_64& rng) {
  if (dims.size() < 2) throw invalid_input("mlp needs at least in/out dims");
  Mlp m;
  for (size_t i = 0; i + 1 < dims.size(); ++i)
    m.layers.push_back(make_dense(dims[i], dims[i + 1], rng));
  return m;
}

// ReLU between hidden layers; final layer linear unless relu_last. Dropout,
// when enabled, sits after each hidden activation.
inline Var mlp_forward(Tape& tape, const Mlp& m, Var x, bool relu_last = false,
                       double dropout_rate = 0.0,
                       std::mt19937_64* dropout_rng = nullptr) {
  for (size_t i = 0; i < m.layers.size(); ++i) {
    x = dense_forward(tape, m.layers[i], x);
    const bool last = (i + 1 == m.layers.size());
    if (!last || relu_last) x = tape.relu(x);
    if (!last && dropout_rng)
      x = tape.dropout(x, dropout_rate, *dropout_rng, true);
  }
  return x;
}

// sigma(norm_adj * H * W); sigma = ReLU when activate.
inline Var gcn_layer(Tape& tape, const Var& h, const NormAdjacency& norm,
                     const Var& w, bool activate) {
  Var out = tape.matmul(tape.spmm(norm, h), w);
  return activate ? tape.relu(out) : out;
}

inline Var gcn_layer(Tape& tape, const Var& h, const Graph& g, const Var& w,
                     bool activate) {
  return gcn_layer(tape, h, normalized_adjacency(g), w, activate);
}

// L2-normalized mean over the closed neighborhood; the normalization is the
// nonlinearity, so `activate` is accepted for interface uniformity but unused.
inline Var sage_layer(Tape& tape, const Var& h, const SparseRows& mean_self,
                      const Var& w, bool activate = false) {
  (void)activate;
  return tape.row_l2norm(tape.matmul(tape.spmm(mean_self, h), w));
}

inline Var sage_layer(Tape& tape, const Var& h, const Graph& g, const Var& w,
                      bool activate = false) {
  return sage_layer(tape, h, neighbor_mean_with_self(g), w, activate);
}

// sigma(H W1 + neighbor_mean(H) W2); zero neighbor term for isolated nodes.
inline Var onegnn_layer(Tape& tape, const Var& h, const SparseRows& nmean,
                        const Var& w1, const Var& w2, bool activate) {
  Var out = tape.add(tape.matmul(h, w1), tape.matmul(tape.spmm(nmean, h), w2));
  return activate ? tape.relu(out) : out;
}

inline Var onegnn_layer(Tape& tape, const Var& h, const Graph& g,
                        const Var& w1, const Var& w2, bool activate) {
  return onegnn_layer(tape, h, neighbor_mean(g), w1, w2, activate);
}

}  // namespace netcausal
