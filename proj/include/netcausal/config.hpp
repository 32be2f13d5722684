#pragma once

#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "netcausal/baselines.hpp"
#include "netcausal/common.hpp"
#include "netcausal/dataset_io.hpp"
#include "netcausal/estimator.hpp"
#include "netcausal/policy.hpp"
#include "netcausal/regret.hpp"
#include "netcausal/toml.hpp"

namespace netcausal {

inline const std::vector<std::string>& estimator_names() {
  static const std::vector<std::string> names{
      "gcn", "sage", "onegnn", "da-ridge", "da-mlp", "dr-ridge", "dr-mlp"};
  return names;
}

inline bool is_gnn_estimator(const std::string& name) {
  return name == "gcn" || name == "sage" || name == "onegnn";
}

inline void check_estimator_name(const std::string& name) {
  for (const auto& k : estimator_names())
    if (k == name) return;
  std::string valid;
  for (const auto& k : estimator_names()) {
    if (!valid.empty()) valid += ", ";
    valid += k;
  }
  throw invalid_input("unknown estimator '" + name + "' (valid kinds: " + valid + ")");
}

struct RegretSection {
  std::vector<std::string> families{"edgeless", "path", "ring", "star", "regular"};
  std::vector<int> n_nodes{100, 400};
  int regular_d = 4;
  double er_p = 0.05;
  int n_trials = 10000;
  double eps_lo = 0.05;
  double eps_hi = 0.5;
  int eps_points = 10;
  // Constants feeding the finite-class bound report.
  double m1 = 2.0;
  double m2 = 1.0;
  double lips = 0.5;
  double pi_class_size = 64.0;
  double delta_conf = 0.05;
  double alpha_tau = 1.0;
  double alpha_delta = 1.0;
  double zeta_tau = 0.5;
  double zeta_delta = 0.5;
  double p_t = -1.0;  // < 0 leaves the constrained-radius variant off
  std::vector<int> claim1_d{1, 2, 4, 8};
  std::vector<int> claim1_n{100, 400, 1600, 6400};
  int lipschitz_pairs = 500;
  int lipschitz_nodes = 60;
  double lipschitz_alpha = 0.5;

  void validate() const {
    static const std::set<std::string> known{"edgeless", "path", "ring",
                                             "star", "regular", "er"};
    for (const auto& f : families)
      if (!known.count(f)) throw invalid_input("unknown graph family '" + f + "'");
    for (int n : n_nodes)
      if (n < 4) throw invalid_input("regret graphs need at least 4 nodes");
    if (regular_d < 1 || regular_d > 6)
      throw invalid_input("regular family degree must lie in [1, 6]");
    if (er_p <= 0.0 || er_p >= 1.0) throw invalid_input("er family needs 0 < p < 1");
    if (n_trials < 1) throw invalid_input("regret needs at least one trial");
    if (!(eps_lo > 0.0) || !(eps_hi > eps_lo))
      throw invalid_input("need 0 < eps_lo < eps_hi");
    if (eps_points < 2) throw invalid_input("eps grid needs at least 2 points");
    if (lipschitz_pairs < 1 || lipschitz_nodes < 4)
      throw invalid_input("lipschitz check needs pairs >= 1 and nodes >= 4");
    if (lipschitz_alpha < 0.0) throw invalid_input("lipschitz alpha must be >= 0");
  }

  std::vector<double> eps_grid() const {
    std::vector<double> g(eps_points);
    for (int i = 0; i < eps_points; ++i)
      g[i] = eps_lo + (eps_hi - eps_lo) * i / (eps_points - 1);
    return g;
  }

  // d_max and n are site-specific; the remaining constants come from here.
  BoundInputs bound_inputs(std::int64_t n, int d_max) const {
    BoundInputs b;
    b.n = n;
    b.d_max = d_max;
    b.m1 = m1;
    b.m2 = m2;
    b.lips = lips;
    b.pi_class_size = pi_class_size;
    b.delta_conf = delta_conf;
    b.alpha_tau = alpha_tau;
    b.alpha_delta = alpha_delta;
    b.zeta_tau = zeta_tau;
    b.zeta_delta = zeta_delta;
    b.p_t = p_t;
    return b;
  }
};

// One document drives every subcommand; stages read only their sections.
struct ExperimentConfig {
  std::uint64_t seed = 1;  // root seed; per-stage streams derive from it
  GenConfig gen;
  bool gen_seed_set = false;  // generate.seed appeared explicitly

  std::string estimator = "onegnn";
  EstimatorConfig est;
  TrainConfig train;
  int est_reps = 3;

  std::string propensity = "fit";  // "fit" or "constant"
  double propensity_p = 0.5;
  double ridge_lambda = 1e-3;
  std::vector<int> mlp_hidden{32};
  int mlp_epochs = 1500;
  double mlp_lr = 1e-2;

  PolicyConfig policy;
  int policy_reps = 5;
  int n_random = 50;
  int policy_samples = 200;

  RegretSection regret;

  std::string out_dir = "runs";

  std::uint64_t gen_seed() const { return gen_seed_set ? gen.seed : seed; }

  void validate() const {
    check_estimator_name(estimator);
    est.validate();
    train.validate();
    policy.validate();
    regret.validate();
    if (est_reps < 1 || policy_reps < 1)
      throw invalid_input("repetition counts must be >= 1");
    if (propensity != "fit" && propensity != "constant")
      throw invalid_input("propensity must be 'fit' or 'constant'");
    if (propensity_p <= 0.0 || propensity_p >= 1.0)
      throw invalid_input("constant propensity must lie in (0, 1)");
    if (ridge_lambda <= 0.0) throw invalid_input("ridge lambda must be positive");
    if (mlp_hidden.empty() || mlp_epochs < 1 || mlp_lr <= 0.0)
      throw invalid_input("mlp backend settings out of range");
    if (n_random < 1 || policy_samples < 1)
      throw invalid_input("policy evaluation sample counts must be >= 1");
    if (out_dir.empty()) throw invalid_input("output dir must be nonempty");
  }
};

namespace detail {

inline std::vector<int> as_int_array(const toml::Value& v) {
  if (v.kind != toml::Value::Kind::array)
    throw parse_error("config value is not an array");
  std::vector<int> out;
  out.reserve(v.arr.size());
  for (const auto& e : v.arr) out.push_back(static_cast<int>(e.as_int()));
  return out;
}

inline std::vector<std::string> as_str_array(const toml::Value& v) {
  if (v.kind != toml::Value::Kind::array)
    throw parse_error("config value is not an array");
  std::vector<std::string> out;
  out.reserve(v.arr.size());
  for (const auto& e : v.arr) out.push_back(e.as_str());
  return out;
}

}  // namespace detail

inline const std::set<std::string>& experiment_config_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k = gen_config_keys();
    k.insert("seed");
    for (const char* s :
         {"name", "kappa", "balance", "sigma", "use_exposure", "ite_z",
          "dim_scale", "phi_dims", "gnn_dims", "head_dims", "lr",
          "weight_decay", "epochs", "eval_every", "dropout", "hsic_batch",
          "reps"})
      k.insert(std::string("estimator.") + s);
    for (const char* s : {"propensity", "propensity_p", "ridge_lambda",
                          "mlp_hidden", "mlp_epochs", "mlp_lr"})
      k.insert(std::string("baselines.") + s);
    for (const char* s :
         {"net", "hidden", "dim_scale", "p_t", "tau_g", "lr", "epochs",
          "gamma_grid", "feas_tol", "residual_samples", "mc_samples", "reps",
          "n_random", "policy_samples"})
      k.insert(std::string("policy.") + s);
    for (const char* s :
         {"families", "n_nodes", "regular_d", "er_p", "n_trials", "eps_lo",
          "eps_hi", "eps_points", "m1", "m2", "lips", "pi_class_size",
          "delta_conf", "alpha_tau", "alpha_delta", "zeta_tau", "zeta_delta",
          "p_t", "claim1_d", "claim1_n", "lipschitz_pairs", "lipschitz_nodes",
          "lipschitz_alpha"})
      k.insert(std::string("regret.") + s);
    k.insert("output.dir");
    return k;
  }();
  return keys;
}

inline ExperimentConfig experiment_config_from_table(const toml::Table& t) {
  const auto& allowed = experiment_config_keys();
  for (const auto& [key, _] : t)
    if (!allowed.count(key))
      throw invalid_input("unknown config key '" + key + "'");

  ExperimentConfig cfg;
  auto get = [&](const std::string& key) -> const toml::Value* {
    auto it = t.find(key);
    return it == t.end() ? nullptr : &it->second;
  };

  if (auto* v = get("seed")) cfg.seed = static_cast<std::uint64_t>(v->as_int());
  cfg.gen = gen_config_from_table(t);
  cfg.gen_seed_set = t.count("generate.seed") > 0;

  if (auto* v = get("estimator.name")) cfg.estimator = v->as_str();
  if (auto* v = get("estimator.kappa")) cfg.est.kappa = v->as_double();
  if (auto* v = get("estimator.balance"))
    cfg.est.balance = balance_from_name(v->as_str());
  if (auto* v = get("estimator.sigma")) cfg.est.sigma = v->as_double();
  if (auto* v = get("estimator.use_exposure")) cfg.est.use_exposure = v->as_bool();
  if (auto* v = get("estimator.ite_z")) cfg.est.ite_z = ite_z_from_name(v->as_str());
  if (auto* v = get("estimator.dim_scale")) cfg.est.dim_scale = v->as_double();
  if (auto* v = get("estimator.phi_dims")) cfg.est.phi_dims = detail::as_int_array(*v);
  if (auto* v = get("estimator.gnn_dims")) cfg.est.gnn_dims = detail::as_int_array(*v);
  if (auto* v = get("estimator.head_dims")) cfg.est.head_dims = detail::as_int_array(*v);
  if (auto* v = get("estimator.lr")) cfg.train.lr = v->as_double();
  if (auto* v = get("estimator.weight_decay")) cfg.train.weight_decay = v->as_double();
  if (auto* v = get("estimator.epochs")) cfg.train.epochs = static_cast<int>(v->as_int());
  if (auto* v = get("estimator.eval_every"))
    cfg.train.eval_every = static_cast<int>(v->as_int());
  if (auto* v = get("estimator.dropout")) cfg.train.dropout = v->as_double();
  if (auto* v = get("estimator.hsic_batch"))
    cfg.train.hsic_batch = static_cast<int>(v->as_int());
  if (auto* v = get("estimator.reps")) cfg.est_reps = static_cast<int>(v->as_int());

  if (auto* v = get("baselines.propensity")) cfg.propensity = v->as_str();
  if (auto* v = get("baselines.propensity_p")) cfg.propensity_p = v->as_double();
  if (auto* v = get("baselines.ridge_lambda")) cfg.ridge_lambda = v->as_double();
  if (auto* v = get("baselines.mlp_hidden")) cfg.mlp_hidden = detail::as_int_array(*v);
  if (auto* v = get("baselines.mlp_epochs"))
    cfg.mlp_epochs = static_cast<int>(v->as_int());
  if (auto* v = get("baselines.mlp_lr")) cfg.mlp_lr = v->as_double();

  if (auto* v = get("policy.net"))
    cfg.policy.net = policy_net_from_name(v->as_str());
  if (auto* v = get("policy.hidden")) cfg.policy.hidden = detail::as_int_array(*v);
  if (auto* v = get("policy.dim_scale")) cfg.policy.dim_scale = v->as_double();
  if (auto* v = get("policy.p_t")) cfg.policy.p_t = v->as_double();
  if (auto* v = get("policy.tau_g")) cfg.policy.tau_g = v->as_double();
  if (auto* v = get("policy.lr")) cfg.policy.lr = v->as_double();
  if (auto* v = get("policy.epochs")) cfg.policy.epochs = static_cast<int>(v->as_int());
  if (auto* v = get("policy.gamma_grid")) cfg.policy.gamma_grid = v->as_double_array();
  if (auto* v = get("policy.feas_tol")) cfg.policy.feas_tol = v->as_double();
  if (auto* v = get("policy.residual_samples"))
    cfg.policy.residual_samples = static_cast<int>(v->as_int());
  if (auto* v = get("policy.mc_samples"))
    cfg.policy.mc_samples = static_cast<int>(v->as_int());
  if (auto* v = get("policy.reps")) cfg.policy_reps = static_cast<int>(v->as_int());
  if (auto* v = get("policy.n_random")) cfg.n_random = static_cast<int>(v->as_int());
  if (auto* v = get("policy.policy_samples"))
    cfg.policy_samples = static_cast<int>(v->as_int());

  if (auto* v = get("regret.families")) cfg.regret.families = detail::as_str_array(*v);
  if (auto* v = get("regret.n_nodes")) cfg.regret.n_nodes = detail::as_int_array(*v);
  if (auto* v = get("regret.regular_d"))
    cfg.regret.regular_d = static_cast<int>(v->as_int());
  if (auto* v = get("regret.er_p")) cfg.regret.er_p = v->as_double();
  if (auto* v = get("regret.n_trials"))
    cfg.regret.n_trials = static_cast<int>(v->as_int());
  if (auto* v = get("regret.eps_lo")) cfg.regret.eps_lo = v->as_double();
  if (auto* v = get("regret.eps_hi")) cfg.regret.eps_hi = v->as_double();
  if (auto* v = get("regret.eps_points"))
    cfg.regret.eps_points = static_cast<int>(v->as_int());
  if (auto* v = get("regret.m1")) cfg.regret.m1 = v->as_double();
  if (auto* v = get("regret.m2")) cfg.regret.m2 = v->as_double();
  if (auto* v = get("regret.lips")) cfg.regret.lips = v->as_double();
  if (auto* v = get("regret.pi_class_size")) cfg.regret.pi_class_size = v->as_double();
  if (auto* v = get("regret.delta_conf")) cfg.regret.delta_conf = v->as_double();
  if (auto* v = get("regret.alpha_tau")) cfg.regret.alpha_tau = v->as_double();
  if (auto* v = get("regret.alpha_delta")) cfg.regret.alpha_delta = v->as_double();
  if (auto* v = get("regret.zeta_tau")) cfg.regret.zeta_tau = v->as_double();
  if (auto* v = get("regret.zeta_delta")) cfg.regret.zeta_delta = v->as_double();
  if (auto* v = get("regret.p_t")) cfg.regret.p_t = v->as_double();
  if (auto* v = get("regret.claim1_d")) cfg.regret.claim1_d = detail::as_int_array(*v);
  if (auto* v = get("regret.claim1_n")) cfg.regret.claim1_n = detail::as_int_array(*v);
  if (auto* v = get("regret.lipschitz_pairs"))
    cfg.regret.lipschitz_pairs = static_cast<int>(v->as_int());
  if (auto* v = get("regret.lipschitz_nodes"))
    cfg.regret.lipschitz_nodes = static_cast<int>(v->as_int());
  if (auto* v = get("regret.lipschitz_alpha"))
    cfg.regret.lipschitz_alpha = v->as_double();

  if (auto* v = get("output.dir")) cfg.out_dir = v->as_str();

  cfg.validate();
  return cfg;
}

inline ExperimentConfig experiment_config_from_file(const std::string& path) {
  return experiment_config_from_table(toml::parse_file(path));
}

namespace detail {

inline void emit_int_array(std::ostream& out, const char* key,
                           const std::vector<int>& v) {
  out << key << " = [";
  for (size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v[i];
  out << "]\n";
}

inline void emit_double_array(std::ostream& out, const char* key,
                              const std::vector<double>& v) {
  out << key << " = [";
  for (size_t i = 0; i < v.size(); ++i)
    out << (i ? ", " : "") << toml::format_double(v[i]);
  out << "]\n";
}

inline void emit_str_array(std::ostream& out, const char* key,
                           const std::vector<std::string>& v) {
  out << key << " = [";
  for (size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << '"' << v[i] << '"';
  out << "]\n";
}

}  // namespace detail

// Canonical serialization: every key, fixed order, exact doubles. The run
// hash is taken over this text so it covers flag overrides too.
inline std::string experiment_config_toml(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "seed = " << cfg.seed << "\n\n";
  GenConfig gen = cfg.gen;
  gen.seed = cfg.gen_seed();
  out << gen_config_toml(gen);

  out << "\n[estimator]\n";
  out << "name = \"" << cfg.estimator << "\"\n";
  out << "kappa = " << toml::format_double(cfg.est.kappa) << "\n";
  out << "balance = \"" << balance_name(cfg.est.balance) << "\"\n";
  out << "sigma = " << toml::format_double(cfg.est.sigma) << "\n";
  out << "use_exposure = " << (cfg.est.use_exposure ? "true" : "false") << "\n";
  out << "ite_z = \"" << ite_z_name(cfg.est.ite_z) << "\"\n";
  out << "dim_scale = " << toml::format_double(cfg.est.dim_scale) << "\n";
  detail::emit_int_array(out, "phi_dims", cfg.est.phi_dims);
  detail::emit_int_array(out, "gnn_dims", cfg.est.gnn_dims);
  detail::emit_int_array(out, "head_dims", cfg.est.head_dims);
  out << "lr = " << toml::format_double(cfg.train.lr) << "\n";
  out << "weight_decay = " << toml::format_double(cfg.train.weight_decay) << "\n";
  out << "epochs = " << cfg.train.epochs << "\n";
  out << "eval_every = " << cfg.train.eval_every << "\n";
  out << "dropout = " << toml::format_double(cfg.train.dropout) << "\n";
  out << "hsic_batch = " << cfg.train.hsic_batch << "\n";
  out << "reps = " << cfg.est_reps << "\n";

  out << "\n[baselines]\n";
  out << "propensity = \"" << cfg.propensity << "\"\n";
  out << "propensity_p = " << toml::format_double(cfg.propensity_p) << "\n";
  out << "ridge_lambda = " << toml::format_double(cfg.ridge_lambda) << "\n";
  detail::emit_int_array(out, "mlp_hidden", cfg.mlp_hidden);
  out << "mlp_epochs = " << cfg.mlp_epochs << "\n";
  out << "mlp_lr = " << toml::format_double(cfg.mlp_lr) << "\n";

  out << "\n[policy]\n";
  out << "net = \"" << policy_net_name(cfg.policy.net) << "\"\n";
  detail::emit_int_array(out, "hidden", cfg.policy.hidden);
  out << "dim_scale = " << toml::format_double(cfg.policy.dim_scale) << "\n";
  out << "p_t = " << toml::format_double(cfg.policy.p_t) << "\n";
  out << "tau_g = " << toml::format_double(cfg.policy.tau_g) << "\n";
  out << "lr = " << toml::format_double(cfg.policy.lr) << "\n";
  out << "epochs = " << cfg.policy.epochs << "\n";
  detail::emit_double_array(out, "gamma_grid", cfg.policy.gamma_grid);
  out << "feas_tol = " << toml::format_double(cfg.policy.feas_tol) << "\n";
  out << "residual_samples = " << cfg.policy.residual_samples << "\n";
  out << "mc_samples = " << cfg.policy.mc_samples << "\n";
  out << "reps = " << cfg.policy_reps << "\n";
  out << "n_random = " << cfg.n_random << "\n";
  out << "policy_samples = " << cfg.policy_samples << "\n";

  out << "\n[regret]\n";
  detail::emit_str_array(out, "families", cfg.regret.families);
  detail::emit_int_array(out, "n_nodes", cfg.regret.n_nodes);
  out << "regular_d = " << cfg.regret.regular_d << "\n";
  out << "er_p = " << toml::format_double(cfg.regret.er_p) << "\n";
  out << "n_trials = " << cfg.regret.n_trials << "\n";
  out << "eps_lo = " << toml::format_double(cfg.regret.eps_lo) << "\n";
  out << "eps_hi = " << toml::format_double(cfg.regret.eps_hi) << "\n";
  out << "eps_points = " << cfg.regret.eps_points << "\n";
  out << "m1 = " << toml::format_double(cfg.regret.m1) << "\n";
  out << "m2 = " << toml::format_double(cfg.regret.m2) << "\n";
  out << "lips = " << toml::format_double(cfg.regret.lips) << "\n";
  out << "pi_class_size = " << toml::format_double(cfg.regret.pi_class_size) << "\n";
  out << "delta_conf = " << toml::format_double(cfg.regret.delta_conf) << "\n";
  out << "alpha_tau = " << toml::format_double(cfg.regret.alpha_tau) << "\n";
  out << "alpha_delta = " << toml::format_double(cfg.regret.alpha_delta) << "\n";
  out << "zeta_tau = " << toml::format_double(cfg.regret.zeta_tau) << "\n";
  out << "zeta_delta = " << toml::format_double(cfg.regret.zeta_delta) << "\n";
  out << "p_t = " << toml::format_double(cfg.regret.p_t) << "\n";
  detail::emit_int_array(out, "claim1_d", cfg.regret.claim1_d);
  detail::emit_int_array(out, "claim1_n", cfg.regret.claim1_n);
  out << "lipschitz_pairs = " << cfg.regret.lipschitz_pairs << "\n";
  out << "lipschitz_nodes = " << cfg.regret.lipschitz_nodes << "\n";
  out << "lipschitz_alpha = " << toml::format_double(cfg.regret.lipschitz_alpha) << "\n";

  out << "\n[output]\n";
  out << "dir = \"" << cfg.out_dir << "\"\n";
  return out.str();
}

inline std::string experiment_config_hash(const ExperimentConfig& cfg) {
  return fnv1a64_hex(experiment_config_toml(cfg));
}

}  // namespace netcausal
