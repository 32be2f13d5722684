#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "netcausal/common.hpp"
#include "netcausal/graph.hpp"

namespace netcausal {

struct TensorNode {
  Mat value;
  Mat grad;
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() == 0) grad = Mat::Zero(value.rows(), value.cols());
  }
};

using Var = std::shared_ptr<TensorNode>;

inline Var make_var(Mat v, bool requires_grad = false) {
  auto n = std::make_shared<TensorNode>();
  n->value = std::move(v);
  n->requires_grad = requires_grad;
  if (requires_grad) n->ensure_grad();
  return n;
}

inline Var make_scalar(double v, bool requires_grad = false) {
  Mat m(1, 1);
  m(0, 0) = v;
  return make_var(std::move(m), requires_grad);
}

inline void zero_grad(const std::vector<Var>& params) {
  for (const auto& p : params) {
    p->ensure_grad();
    p->grad.setZero();
  }
}

// Reverse-mode tape over matrix ops. Ops are recorded in forward order and
// replayed in exact reverse; a second backward without reset is an error.
class Tape {
 public:
  void backward(const Var& root) {
    if (backward_done_)
      throw training_error("backward called twice without tape reset");
    if (root->value.rows() != 1 || root->value.cols() != 1)
      throw invalid_input("backward root must be a scalar");
    backward_done_ = true;
    root->ensure_grad();
    root->grad(0, 0) = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

  void reset() {
    ops_.clear();
    backward_done_ = false;
  }

  size_t op_count() const { return ops_.size(); }

  Var matmul(const Var& a, const Var& b) {
    if (a->value.cols() != b->value.rows())
      throw invalid_input("matmul: inner dimensions disagree (" + dims(a) +
                          " x " + dims(b) + ")");
    Var out = fresh(a->value * b->value, a, b);
    if (out->requires_grad)
      ops_.push_back([a, b, out] {
        if (out->grad.size() == 0) return;
        if (a->requires_grad) {
          a->ensure_grad();
          a->grad += out->grad * b->value.transpose();
        }
        if (b->requires_grad) {
          b->ensure_grad();
          b->grad += a->value.transpose() * out->grad;
        }
      });
    return out;
  }

  Var add(const Var& a, const Var& b) {
    same_shape(a, b, "add");
    Var out = fresh(a->value + b->value, a, b);
    if (out->requires_grad)
      ops_.push_back([a, b, out] {
        if (out->grad.size() == 0) return;
        accumulate(a, out->grad);
        accumulate(b, out->grad);
      });
    return out;
  }

  Var sub(const Var& a, const Var& b) {
    same_shape(a, b, "sub");
    Var out = fresh(a->value - b->value, a, b);
    if (out->requires_grad)
      ops_.push_back([a, b, out] {
        if (out->grad.size() == 0) return;
        accumulate(a, out->grad);
        if (b->requires_grad) {
          b->ensure_grad();
          b->grad -= out->grad;
        }
      });
    return out;
  }

  Var mul(const Var& a, const Var& b) {
    same_shape(a, b, "mul");
    Var out = fresh(a->value.cwiseProduct(b->value), a, b);
    if (out->requires_grad)
      ops_.push_back([a, b, out] {
        if (out->grad.size() == 0) return;
        accumulate(a, out->grad.cwiseProduct(b->value));
        accumulate(b, out->grad.cwiseProduct(a->value));
      });
    return out;
  }

  Var scale(const Var& a, double c) {
    Var out = fresh(a->value * c, a);
    if (out->requires_grad)
      ops_.push_back([a, out, c] {
        if (out->grad.size() == 0) return;
        accumulate(a, out->grad * c);
      });
    return out;
  }

  // Broadcast a 1 x n bias across rows.
  Var add_rowvec(const Var& a, const Var& b) {
    if (b->value.rows() != 1 || b->value.cols() != a->value.cols())
      throw invalid_input("add_rowvec: bias shape mismatch");
    Mat v = a->value;
    v.rowwise() += b->value.row(0);
    Var out = fresh(std::move(v), a, b);
    if (out->requires_grad)
      ops_.push_back([a, b, out] {
        if (out->grad.size() == 0) return;
        accumulate(a, out->grad);
        if (b->requires_grad) {
          b->ensure_grad();
          b->grad += out->grad.colwise().sum();
        }
      });
    return out;
  }

  // Broadcast an m x 1 column across columns.
  Var add_colvec(const Var& a, const Var& c) {
    if (c->value.cols() != 1 || c->value.rows() != a->value.rows())
      throw invalid_input("add_colvec: column shape mismatch");
    Mat v = a->value;
    v.colwise() += c->value.col(0);
    Var out = fresh(std::move(v), a, c);
    if (out->requires_grad)
      ops_.push_back([a, c, out] {
        if (out->grad.size() == 0) return;
        accumulate(a, out->grad);
        if (c->requires_grad) {
          c->ensure_grad();
          c->grad += out->grad.rowwise().sum();
        }
      });
    return out;
  }

  Var relu(const Var& a) {
    Var out = fresh(a->value.cwiseMax(0.0), a);
    if (out->requires_grad)
      ops_.push_back([a, out] {
        if (out->grad.size() == 0) return;
        accumulate(
            a, (a->value.array() > 0.0).cast<double>().matrix().cwiseProduct(out->grad));
      });
    return out;
  }

  Var sigmoid(const Var& a) {
    Mat v = (1.0 / (1.0 + (-a->value.array()).exp())).matrix();
    Var out = fresh(std::move(v), a);
    if (out->requires_grad)
      ops_.push_back([a, out] {
        if (out->grad.size() == 0) return;
        Mat s = out->value;
        accumulate(a, out->grad.cwiseProduct(
                          (s.array() * (1.0 - s.array())).matrix()));
      });
    return out;
  }

  Var tanh_op(const Var& a) {
    Var out = fresh(a->value.array().tanh().matrix(), a);
    if (out->requires_grad)
      ops_.push_back([a, out] {
        if (out->grad.size() == 0) return;
        accumulate(a, out->grad.cwiseProduct(
                          (1.0 - out->value.array().square()).matrix()));
      });
    return out;
  }

  Var exp_op(const Var& a) {
    Var out = fresh(a->value.array().exp().matrix(), a);
    if (out->requires_grad)
      ops_.push_back([a, out] {
        if (out->grad.size() == 0) return;
        accumulate(a, out->grad.cwiseProduct(out->value));
      });
    return out;
  }

  Var transpose(const Var& a) {
    Var out = fresh(a->value.transpose(), a);
    if (out->requires_grad)
      ops_.push_back([a, out] {
        if (out->grad.size() == 0) return;
        accumulate(a, out->grad.transpose());
      });
    return out;
  }

  // Sparse constant operator applied from the left; the operator is copied.
  Var spmm(const SparseRows& s, const Var& a) {
    Var out = fresh(s.apply(a->value), a);
    if (out->requires_grad)
      ops_.push_back([s, a, out] {
        if (out->grad.size() == 0) return;
        accumulate(a, s.apply_transpose(out->grad));
      });
    return out;
  }

  // Row i of a scaled by s(i, 0); gradients flow to both operands.
  Var row_scale(const Var& a, const Var& s) {
    if (s->value.cols() != 1 || s->value.rows() != a->value.rows())
      throw invalid_input("row_scale: scale must be m x 1");
    Mat v = a->value.array().colwise() * s->value.col(0).array();
    Var out = fresh(std::move(v), a, s);
    if (out->requires_grad)
      ops_.push_back([a, s, out] {
        if (out->grad.size() == 0) return;
        accumulate(a, (out->grad.array().colwise() * s->value.col(0).array()).matrix());
        if (s->requires_grad) {
          s->ensure_grad();
          s->grad += out->grad.cwiseProduct(a->value).rowwise().sum();
        }
      });
    return out;
  }

  // Rows normalized to unit L2 norm; rows with norm < eps pass through.
  Var row_l2norm(const Var& a, double eps = 1e-12) {
    Vec norms = a->value.rowwise().norm();
    Mat v = a->value;
    for (int i = 0; i < v.rows(); ++i)
      if (norms[i] >= eps) v.row(i) /= norms[i];
    Var out = fresh(std::move(v), a);
    if (out->requires_grad)
      ops_.push_back([a, out, norms, eps] {
        if (out->grad.size() == 0) return;
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (int i = 0; i < a->value.rows(); ++i) {
          if (norms[i] < eps) {
            a->grad.row(i) += out->grad.row(i);
          } else {
            const auto y = out->value.row(i);
            const double yg = y.dot(out->grad.row(i));
            a->grad.row(i) += (out->grad.row(i) - yg * y) / norms[i];
          }
        }
      });
    return out;
  }

  Var rowsum(const Var& a) {
    Var out = fresh(a->value.rowwise().sum(), a);
    if (out->requires_grad)
      ops_.push_back([a, out] {
        if (out->grad.size() == 0) return;
        accumulate(a, out->grad.col(0).replicate(1, a->value.cols()));
      });
    return out;
  }

  Var sum(const Var& a) {
    Var out = fresh(Mat::Constant(1, 1, a->value.sum()), a);
    if (out->requires_grad)
      ops_.push_back([a, out] {
        if (out->grad.size() == 0) return;
        accumulate(a, Mat::Constant(a->value.rows(), a->value.cols(),
                                    out->grad(0, 0)));
      });
    return out;
  }

  Var mean_all(const Var& a) {
    return scale(sum(a), 1.0 / static_cast<double>(a->value.size()));
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw invalid_input("concat_cols: no parts");
    const auto rows = parts[0]->value.rows();
    Eigen::Index cols = 0;
    bool rg = false;
    for (const auto& p : parts) {
      if (p->value.rows() != rows)
        throw invalid_input("concat_cols: row counts disagree");
      cols += p->value.cols();
      rg = rg || p->requires_grad;
    }
    Mat v(rows, cols);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
      v.middleCols(off, p->value.cols()) = p->value;
      off += p->value.cols();
    }
    Var out = make_var(std::move(v), rg);
    out->requires_grad = rg;
    check_finite(out->value, "concat_cols");
    if (rg)
      ops_.push_back([parts, out] {
        if (out->grad.size() == 0) return;
        Eigen::Index off = 0;
        for (const auto& p : parts) {
          if (p->requires_grad) {
            p->ensure_grad();
            p->grad += out->grad.middleCols(off, p->value.cols());
          }
          off += p->value.cols();
        }
      });
    return out;
  }

  Var select_rows(const Var& a, const std::vector<int>& idx) {
    Mat v(static_cast<Eigen::Index>(idx.size()), a->value.cols());
    for (size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] < 0 || idx[r] >= a->value.rows())
        throw invalid_input("select_rows: index out of range");
      v.row(static_cast<Eigen::Index>(r)) = a->value.row(idx[r]);
    }
    Var out = fresh(std::move(v), a);
    if (out->requires_grad)
      ops_.push_back([a, idx, out] {
        if (out->grad.size() == 0) return;
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (size_t r = 0; r < idx.size(); ++r)
          a->grad.row(idx[r]) += out->grad.row(static_cast<Eigen::Index>(r));
      });
    return out;
  }

  // Inverted dropout; identity when disabled.
  Var dropout(const Var& a, double rate, std::mt19937_64& rng, bool enabled) {
    if (!enabled || rate <= 0.0) return a;
    if (rate >= 1.0) throw invalid_input("dropout rate must be < 1");
    std::bernoulli_distribution keep(1.0 - rate);
    Mat mask(a->value.rows(), a->value.cols());
    const double inv = 1.0 / (1.0 - rate);
    for (int i = 0; i < mask.rows(); ++i)
      for (int j = 0; j < mask.cols(); ++j) mask(i, j) = keep(rng) ? inv : 0.0;
    Var out = fresh(a->value.cwiseProduct(mask), a);
    if (out->requires_grad)
      ops_.push_back([a, out, mask] {
        if (out->grad.size() == 0) return;
        accumulate(a, out->grad.cwiseProduct(mask));
      });
    return out;
  }

  // Two-class Gumbel-softmax over {treat, control}. noise holds per-row
  // differences of two standard Gumbel draws. Forward emits the hard argmax
  // when hard=true (straight-through); gradients always use the relaxation.
  Var gumbel_st(const Var& p, const Mat& noise, double tau, bool hard) {
    if (tau <= 0.0) throw invalid_input("gumbel temperature must be positive");
    if (p->value.cols() != 1 || noise.cols() != 1 ||
        noise.rows() != p->value.rows())
      throw invalid_input("gumbel_st: p and noise must be matching columns");
    const auto n = p->value.rows();
    Mat pc = p->value.cwiseMax(1e-6).cwiseMin(1.0 - 1e-6);
    Mat soft(n, 1);
    for (int i = 0; i < n; ++i) {
      const double z = std::log(pc(i, 0) / (1.0 - pc(i, 0))) + noise(i, 0);
      soft(i, 0) = 1.0 / (1.0 + std::exp(-z / tau));
    }
    Mat value = hard ? (soft.array() > 0.5).cast<double>().matrix() : soft;
    Var out = fresh(std::move(value), p);
    if (out->requires_grad)
      ops_.push_back([p, out, soft, pc, tau] {
        if (out->grad.size() == 0) return;
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int i = 0; i < soft.rows(); ++i) {
          const double s = soft(i, 0);
          const double q = pc(i, 0);
          p->grad(i, 0) += out->grad(i, 0) * s * (1.0 - s) / (tau * q * (1.0 - q));
        }
      });
    return out;
  }

 private:
  static std::string dims(const Var& v) {
    return std::to_string(v->value.rows()) + "x" + std::to_string(v->value.cols());
  }

  static void same_shape(const Var& a, const Var& b, const char* op) {
    if (a->value.rows() != b->value.rows() || a->value.cols() != b->value.cols())
      throw invalid_input(std::string(op) + ": shapes disagree (" + dims(a) +
                          " vs " + dims(b) + ")");
  }

  static void accumulate(const Var& v, const Mat& g) {
    if (!v->requires_grad) return;
    v->ensure_grad();
    v->grad += g;
  }

  Var fresh(Mat value, const Var& a, const Var& b = nullptr) {
    const bool rg = a->requires_grad || (b && b->requires_grad);
    Var out = make_var(std::move(value), false);
    out->requires_grad = rg;
    check_finite(out->value, "tape op");
    return out;
  }

  std::vector<std::function<void()>> ops_;
  bool backward_done_ = false;
};

}  // namespace netcausal
