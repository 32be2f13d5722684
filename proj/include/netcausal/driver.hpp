#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "netcausal/config.hpp"

namespace netcausal {

namespace detail {

// Runs fn(0..n-1) on up to `jobs` workers. Callers index into preallocated
// slots, so results are ordered regardless of scheduling; the first worker
// exception is rethrown on the calling thread with its type intact.
inline void parallel_reps(int n, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int workers = std::min(jobs, n);
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw parse_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw parse_error("write failed: " + path);
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(path + ": " + e.what());
  }
  return j;
}

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  if (v.size() < 2) return {m, 0.0};
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return {m, std::sqrt(acc / (v.size() - 1))};
}

inline std::string fmt4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

inline std::string fmtg(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

inline double val_rmse_of(const std::vector<double>& yhat, const Dataset& d) {
  const std::vector<int> idx = d.val_indices();
  if (idx.empty()) return 0.0;
  double acc = 0.0;
  for (int i : idx) {
    const double e = yhat[i] - d.y[i];
    acc += e * e;
  }
  return std::sqrt(acc / idx.size());
}

}  // namespace detail

inline nlohmann::json cmd_generate(const ExperimentConfig& cfg,
                                   const std::string& out_dir) {
  GenConfig gen = cfg.gen;
  gen.seed = cfg.gen_seed();
  GeneratedData data = generate_dataset(gen);
  save_dataset(out_dir, data, gen);
  nlohmann::json manifest = detail::read_json_file(
      (std::filesystem::path(out_dir) / "manifest.json").string());
  manifest["experiment_hash"] = experiment_config_hash(cfg);
  return manifest;
}

// Shared by train and eval: test-split metrics for a fitted model, plus the
// validation rmse used to pick the representative rep (test stays untouched
// until the final report).
namespace detail {

struct FitOutputs {
  double rmse = 0.0;
  double pehe = 0.0;
  bool has_pehe = false;
  double val_rmse = 0.0;
};

inline FitOutputs score_predictions(const std::vector<double>& yhat,
                                    const std::vector<double>& tau_hat,
                                    const Dataset& d) {
  FitOutputs out;
  const Metrics m = compute_metrics(yhat, d.y, tau_hat,
                                    d.has_truth ? d.tau : std::vector<double>{},
                                    d.test_indices());
  out.rmse = m.rmse;
  out.pehe = m.pehe;
  out.has_pehe = m.has_pehe;
  out.val_rmse = val_rmse_of(yhat, d);
  return out;
}

inline FitOutputs score_estimator(const EstimatorModel& m,
                                  const LoadedDataset& ld) {
  return score_predictions(
      predict_outcomes(m, ld.graph, ld.data.x, ld.data.t, ld.data.g_exposure),
      extract_ite(m, ld.data.x), ld.data);
}

inline FitOutputs score_baseline(const BaselineModel& m,
                                 const LoadedDataset& ld) {
  return score_predictions(
      baseline_predict_outcome(m, ld.data.x, ld.data.t, ld.data.g_exposure),
      baseline_predict_ite(m, ld.data.x), ld.data);
}

inline Propensity make_propensity(const ExperimentConfig& cfg,
                                  const Dataset& d) {
  if (cfg.propensity == "constant") return Propensity::constant(cfg.propensity_p);
  const std::vector<int> train = d.train_indices();
  std::vector<double> t_train(train.size());
  for (size_t i = 0; i < train.size(); ++i) t_train[i] = d.t[train[i]];
  return fit_propensity(rows_of(d.x, train), t_train);
}

}  // namespace detail

inline nlohmann::json cmd_train(const ExperimentConfig& cfg,
                                const std::string& data_dir,
                                const std::string& out_dir, int jobs = 1) {
  check_estimator_name(cfg.estimator);
  const LoadedDataset ld = load_dataset(data_dir);
  std::filesystem::create_directories(out_dir);

  const std::string name = cfg.estimator;
  struct RepSlot {
    std::uint64_t seed = 0;
    detail::FitOutputs score;
    EstimatorModel gnn;
    BaselineModel base;
  };
  std::vector<RepSlot> slots(static_cast<size_t>(cfg.est_reps));
  detail::parallel_reps(cfg.est_reps, jobs, [&](int rep) {
    RepSlot& slot = slots[static_cast<size_t>(rep)];
    slot.seed = mix_seed(cfg.seed, 100 + rep);
    if (is_gnn_estimator(name)) {
      EstimatorConfig ec = cfg.est;
      ec.gnn_kind = gnn_kind_from_name(name);
      auto rng = make_rng(slot.seed);
      slot.gnn = make_estimator(ec, static_cast<int>(ld.data.x.cols()), rng);
      TrainConfig tc = cfg.train;
      tc.seed = slot.seed;
      train_estimator(slot.gnn, ld.data, ld.graph, tc);
      slot.score = detail::score_estimator(slot.gnn, ld);
    } else {
      const BaselineKind bk = baseline_kind_from_name(name.substr(0, 2));
      const RegKind rk = reg_kind_from_name(name.substr(3));
      const Propensity prop = detail::make_propensity(cfg, ld.data);
      const BackendSpec spec{cfg.ridge_lambda, cfg.mlp_hidden, cfg.mlp_epochs,
                             cfg.mlp_lr};
      slot.base = bk == BaselineKind::da
                      ? fit_da(ld.data, prop, rk, slot.seed, spec)
                      : fit_dr(ld.data, prop, rk, slot.seed, spec);
      slot.score = detail::score_baseline(slot.base, ld);
    }
  });

  nlohmann::json reps = nlohmann::json::array();
  std::vector<double> rmses, pehes;
  bool any_pehe = true;
  size_t best = 0;
  for (size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    rmses.push_back(s.score.rmse);
    if (s.score.has_pehe) pehes.push_back(s.score.pehe);
    any_pehe = any_pehe && s.score.has_pehe;
    if (s.score.val_rmse < slots[best].score.val_rmse) best = i;
    reps.push_back({{"seed", s.seed},
                    {"rmse", s.score.rmse},
                    {"pehe", s.score.pehe},
                    {"has_pehe", s.score.has_pehe},
                    {"val_rmse", s.score.val_rmse}});
  }

  // Artifacts reference each other by basename so a run directory can be
  // moved (and hashed) without path-dependent bytes.
  const std::string model_file = "model_" + name + ".json";
  if (is_gnn_estimator(name))
    save_estimator((std::filesystem::path(out_dir) / model_file).string(),
                   slots[best].gnn);
  else
    save_baseline((std::filesystem::path(out_dir) / model_file).string(),
                  slots[best].base);

  const auto [rm, rs] = detail::mean_std(rmses);
  const auto [pm, ps] = detail::mean_std(pehes);
  nlohmann::json out{{"format", "netcausal-metrics"},
                     {"estimator", name},
                     {"config_hash", experiment_config_hash(cfg)},
                     {"data_hash", gen_config_hash(ld.cfg)},
                     {"seed", cfg.seed},
                     {"reps", reps},
                     {"rmse_mean", rm},
                     {"rmse_std", rs},
                     {"has_pehe", any_pehe},
                     {"pehe_mean", any_pehe ? pm : 0.0},
                     {"pehe_std", any_pehe ? ps : 0.0},
                     {"model_file", model_file}};
  detail::write_json_file(
      (std::filesystem::path(out_dir) / ("metrics_" + name + ".json")).string(),
      out);
  return out;
}

inline nlohmann::json cmd_eval(const ExperimentConfig& cfg,
                               const std::string& data_dir,
                               const std::string& model_path,
                               const std::string& out_dir) {
  const LoadedDataset ld = load_dataset(data_dir);
  const nlohmann::json doc = detail::read_json_file(model_path);
  const std::string kind = doc.value("kind", "");
  detail::FitOutputs score;
  std::string name;
  if (kind == "estimator") {
    const EstimatorModel m = load_estimator(model_path);
    score = detail::score_estimator(m, ld);
    name = gnn_kind_name(m.cfg.gnn_kind);
  } else if (kind == "baseline") {
    const BaselineModel m = load_baseline(model_path);
    score = detail::score_baseline(m, ld);
    name = baseline_kind_name(m.kind);
  } else {
    throw parse_error(model_path + ": not a model file");
  }
  nlohmann::json out{{"format", "netcausal-metrics"},
                     {"estimator", name},
                     {"config_hash", experiment_config_hash(cfg)},
                     {"data_hash", gen_config_hash(ld.cfg)},
                     {"rmse", score.rmse},
                     {"pehe", score.pehe},
                     {"has_pehe", score.has_pehe},
                     {"model_file",
                      std::filesystem::path(model_path).filename().string()}};
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    detail::write_json_file(
        (std::filesystem::path(out_dir) / "eval_metrics.json").string(), out);
  }
  return out;
}

inline nlohmann::json cmd_policy(const ExperimentConfig& cfg,
                                 const std::string& data_dir,
                                 const std::string& model_path,
                                 const std::string& out_dir, int jobs = 1) {
  const LoadedDataset ld = load_dataset(data_dir);
  const EstimatorModel est = load_estimator(model_path);
  std::filesystem::create_directories(out_dir);

  struct RepSlot {
    std::uint64_t seed = 0;
    PolicyModel pol;
    PolicyTrainResult tr;
    UtilityReport report;
  };
  std::vector<RepSlot> slots(static_cast<size_t>(cfg.policy_reps));
  detail::parallel_reps(cfg.policy_reps, jobs, [&](int rep) {
    RepSlot& slot = slots[static_cast<size_t>(rep)];
    PolicyConfig pc = cfg.policy;
    pc.seed = mix_seed(cfg.seed, 200 + rep);
    slot.seed = pc.seed;
    auto rng = make_rng(pc.seed);
    slot.pol = make_policy(pc, static_cast<int>(ld.data.x.cols()), rng);
    slot.tr = train_policy(slot.pol, est, ld.graph, ld.data.x);
    auto eval_rng = make_rng(cfg.seed, 250 + rep);
    slot.report = evaluate_improvement(
        slot.pol, est, ld.data, ld.graph, ld.cfg.alpha, ld.cfg.spillover_order,
        cfg.n_random, eval_rng, cfg.policy_samples);
  });

  nlohmann::json reps = nlohmann::json::array();
  std::vector<double> dhat, dtrue;
  double residual_max = 0.0;
  bool all_true = true;
  size_t best = 0;
  for (size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    dhat.push_back(s.report.delta_s_hat);
    if (s.report.has_true) dtrue.push_back(s.report.delta_s_true);
    all_true = all_true && s.report.has_true;
    residual_max = std::max(residual_max, s.report.residual);
    if (s.tr.s_hat > slots[best].tr.s_hat) best = i;
    nlohmann::json r = report_to_json(s.report);
    r["seed"] = s.seed;
    r["gamma"] = s.tr.gamma;
    reps.push_back(std::move(r));
  }

  const auto [hm, hs] = detail::mean_std(dhat);
  const auto [tm, ts] = detail::mean_std(dtrue);
  std::ostringstream row;
  row << "| " << policy_net_name(cfg.policy.net)
      << " (p_t = " << detail::fmtg(cfg.policy.p_t) << ") | "
      << detail::fmt4(hm) << " ± " << detail::fmt4(hs) << " | ";
  if (all_true)
    row << detail::fmt4(tm) << " ± " << detail::fmt4(ts);
  else
    row << "n/a";
  row << " | " << detail::fmt4(residual_max) << " |";

  const std::string pol_file = "policy_model.json";
  save_policy((std::filesystem::path(out_dir) / pol_file).string(),
              slots[best].pol);

  nlohmann::json out{{"format", "netcausal-policy-report"},
                     {"config_hash", experiment_config_hash(cfg)},
                     {"seed", cfg.seed},
                     {"p_t", cfg.policy.p_t},
                     {"net", policy_net_name(cfg.policy.net)},
                     {"reps", reps},
                     {"delta_s_hat_mean", hm},
                     {"delta_s_hat_std", hs},
                     {"has_true", all_true},
                     {"delta_s_true_mean", all_true ? tm : 0.0},
                     {"delta_s_true_std", all_true ? ts : 0.0},
                     {"residual_max", residual_max},
                     {"model_file", pol_file},
                     {"table_row", row.str()}};
  detail::write_json_file(
      (std::filesystem::path(out_dir) / "policy_report.json").string(), out);
  return out;
}

namespace detail {

inline Graph build_family_graph(const std::string& family, int n,
                                const RegretSection& rs, std::mt19937_64& rng) {
  if (family == "edgeless") return Graph(n);
  if (family == "path") return make_path_graph(n);
  if (family == "ring") return make_ring_graph(n);
  if (family == "star") return make_star_graph(n);
  if (family == "regular") return make_regular_graph(n, rs.regular_d, rng);
  if (family == "er") return make_er_graph(n, rs.er_p, rng);
  throw invalid_input("unknown graph family '" + family + "'");
}

}  // namespace detail

inline nlohmann::json cmd_regret(const ExperimentConfig& cfg,
                                 const std::string& out_dir) {
  const RegretSection& rs = cfg.regret;
  if (rs.families.empty())
    throw invalid_input("regret run needs at least one graph family");
  rs.validate();
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  const std::string hash = experiment_config_hash(cfg);
  const std::vector<double> eps = rs.eps_grid();
  const NetworkedFamily fam = uniform_mean_family();

  std::ostringstream hg_csv;
  hg_csv << "family,n,d_max,omega,omega_bound,max_edge_size,tight\n";
  nlohmann::json bound_entries = nlohmann::json::array();
  std::vector<std::string> files;
  long long violations = 0, checks = 0;

  for (size_t fi = 0; fi < rs.families.size(); ++fi) {
    const std::string& family = rs.families[fi];
    for (size_t ni = 0; ni < rs.n_nodes.size(); ++ni) {
      const int n = rs.n_nodes[ni];
      const std::uint64_t site = 16 * fi + ni;
      auto g_rng = make_rng(cfg.seed, 300 + site);
      const Graph g = detail::build_family_graph(family, n, rs, g_rng);
      const Hypergraph hg = build_hypergraph(g);
      const int d_max = g.max_degree();
      const int omega_bound = d_max * d_max + 1;
      hg_csv << family << "," << n << "," << d_max << "," << hg.omega << ","
             << omega_bound << "," << hg.max_edge_size << ","
             << (hg.omega == omega_bound ? 1 : 0) << "\n";

      const auto rows =
          concentration_check(g, fam, rs.n_trials, eps, mix_seed(cfg.seed, 400 + site));
      for (const auto& r : rows) violations += r.violation ? 1 : 0;
      checks += static_cast<long long>(rows.size());
      const std::string cpath =
          (dir / ("concentration_" + family + "_" + std::to_string(n) + ".csv"))
              .string();
      detail::write_text_file(cpath, concentration_csv(rows));
      files.push_back(cpath);

      nlohmann::json entry = bound_report_json(rs.bound_inputs(n, d_max));
      entry["family"] = family;
      bound_entries.push_back(std::move(entry));
    }
  }

  const std::string hg_path = (dir / "hypergraph.csv").string();
  detail::write_text_file(hg_path, hg_csv.str());
  files.push_back(hg_path);

  detail::write_json_file((dir / "bound.json").string(),
                          {{"format", "netcausal-regret-bounds"},
                           {"config_hash", hash},
                           {"entries", bound_entries}});
  files.push_back((dir / "bound.json").string());

  std::ostringstream c1;
  c1 << "d_max,n,value\n";
  for (const auto& r : claim1_curve(rs.claim1_d, rs.claim1_n))
    c1 << r.d_max << "," << r.n << "," << toml::format_double(r.value) << "\n";
  detail::write_text_file((dir / "claim1.csv").string(), c1.str());
  files.push_back((dir / "claim1.csv").string());

  auto lip_rng = make_rng(cfg.seed, 500);
  const Graph lg = make_er_graph(rs.lipschitz_nodes,
                                 std::min(0.5, 8.0 / rs.lipschitz_nodes), lip_rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> tau(static_cast<size_t>(rs.lipschitz_nodes));
  for (auto& v : tau) v = gauss(lip_rng);
  const LipschitzResult lip =
      lipschitz_check(lg, tau, rs.lipschitz_alpha, rs.lipschitz_pairs, lip_rng);
  detail::write_json_file((dir / "lipschitz.json").string(),
                          {{"format", "netcausal-lipschitz"},
                           {"config_hash", hash},
                           {"max_ratio", lip.max_ratio},
                           {"bound", lip.bound},
                           {"pairs_used", lip.pairs_used},
                           {"ok", lip.ok}});
  files.push_back((dir / "lipschitz.json").string());

  nlohmann::json out{{"format", "netcausal-regret-summary"},
                     {"config_hash", hash},
                     {"violations", violations},
                     {"checks", checks},
                     {"lipschitz_ok", lip.ok},
                     {"files", files}};
  detail::write_json_file((dir / "regret_summary.json").string(), out);
  return out;
}

// Renders the metrics and policy artifacts found under run_dir as Markdown:
// one estimator comparison table, one policy table.
inline std::string cmd_report(const std::string& run_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(run_dir))
    throw invalid_input("report needs an existing run directory");
  std::vector<std::string> metric_files, policy_files;
  for (const auto& e : fs::recursive_directory_iterator(run_dir)) {
    if (!e.is_regular_file()) continue;
    const std::string stem = e.path().filename().string();
    if (stem.rfind("metrics_", 0) == 0 && e.path().extension() == ".json")
      metric_files.push_back(e.path().string());
    else if (stem == "policy_report.json")
      policy_files.push_back(e.path().string());
  }
  std::sort(metric_files.begin(), metric_files.end());
  std::sort(policy_files.begin(), policy_files.end());

  std::ostringstream md;
  md << "# Experiment report\n";
  if (!metric_files.empty()) {
    md << "\n## Outcome and effect estimation\n\n";
    md << "| estimator | test rmse | pehe |\n|---|---|---|\n";
    for (const auto& f : metric_files) {
      const nlohmann::json j = detail::read_json_file(f);
      md << "| " << j.value("estimator", "?") << " | "
         << detail::fmt4(j.value("rmse_mean", 0.0)) << " ± "
         << detail::fmt4(j.value("rmse_std", 0.0)) << " | ";
      if (j.value("has_pehe", false))
        md << detail::fmt4(j.value("pehe_mean", 0.0)) << " ± "
           << detail::fmt4(j.value("pehe_std", 0.0));
      else
        md << "n/a";
      md << " |\n";
    }
  }
  if (!policy_files.empty()) {
    md << "\n## Policy improvement\n\n";
    md << "| policy | delta s_hat | delta s | max residual |\n|---|---|---|---|\n";
    for (const auto& f : policy_files) {
      const nlohmann::json j = detail::read_json_file(f);
      md << j.value("table_row", "") << "\n";
    }
  }
  if (metric_files.empty() && policy_files.empty())
    md << "\nNo metrics or policy artifacts found.\n";

  const std::string text = md.str();
  detail::write_text_file((fs::path(run_dir) / "report.md").string(), text);
  return text;
}

}  // namespace netcausal
