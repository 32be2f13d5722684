#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "netcausal/driver.hpp"

namespace {

namespace fs = std::filesystem;
using netcausal::ExperimentConfig;

std::string default_out(const ExperimentConfig& cfg, const std::string& flag,
                        const std::string& leaf) {
  if (!flag.empty()) return flag;
  return leaf.empty() ? cfg.out_dir : (fs::path(cfg.out_dir) / leaf).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"netcausal: estimation under network interference, constrained "
               "policy search, and concentration-bound checks"};
  app.require_subcommand(1);

  std::string config_path, data_dir, model_path, out_dir, run_dir;
  std::uint64_t seed = 1;
  int jobs = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (TOML)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the root seed");
    sub->add_option("--jobs", jobs,
                    "worker threads for independent repetitions")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "output directory");
  };

  auto* gen = app.add_subcommand("generate", "synthesize a dataset directory");
  add_common(gen);
  auto* train =
      app.add_subcommand("train", "fit an estimator, report test metrics");
  add_common(train);
  train->add_option("--data", data_dir, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  auto* eval = app.add_subcommand("eval", "score a saved model on a dataset");
  add_common(eval);
  eval->add_option("--data", data_dir, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--model", model_path, "model file")->required();
  auto* policy = app.add_subcommand(
      "policy", "optimize a treatment-rate-constrained policy through a "
                "saved estimator");
  add_common(policy);
  policy->add_option("--data", data_dir, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  policy->add_option("--model", model_path, "estimator model file")->required();
  auto* regret =
      app.add_subcommand("regret", "concentration, bound, and Lipschitz tables");
  add_common(regret);
  auto* report =
      app.add_subcommand("report", "render Markdown tables from run artifacts");
  report->add_option("--run", run_dir, "run directory")
      ->required()
      ->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      std::cout << netcausal::cmd_report(run_dir);
      return 0;
    }
    ExperimentConfig cfg = netcausal::experiment_config_from_file(config_path);
    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed") > 0) cfg.seed = seed;

    nlohmann::json out;
    if (gen->parsed())
      out = netcausal::cmd_generate(cfg, default_out(cfg, out_dir, "dataset"));
    else if (train->parsed())
      out = netcausal::cmd_train(cfg, data_dir, default_out(cfg, out_dir, ""),
                                 jobs);
    else if (eval->parsed())
      out = netcausal::cmd_eval(cfg, data_dir, model_path, out_dir);
    else if (policy->parsed())
      out = netcausal::cmd_policy(cfg, data_dir, model_path,
                                  default_out(cfg, out_dir, ""), jobs);
    else if (regret->parsed())
      out = netcausal::cmd_regret(cfg, default_out(cfg, out_dir, "regret"));
    std::cout << out.dump(2) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
