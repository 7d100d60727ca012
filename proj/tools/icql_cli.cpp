// Experiment runner for the ICQL laboratory: trains a config over its seeds,
// evaluates checkpoints, and renders learning curves from metrics CSVs.

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "icql/checkpoint.hpp"
#include "icql/config.hpp"
#include "icql/plot.hpp"
#include "icql/runner.hpp"

namespace {

icql::Config resolve_config(const std::string& config_file,
                            const std::vector<std::string>& overrides,
                            const std::string& algorithm, const std::string& seeds,
                            long episodes, const std::string& out_dir, int threads) {
  icql::Config cfg;
  if (!config_file.empty()) icql::apply_config_file(config_file, cfg);
  for (const auto& kv : overrides) icql::apply_override(cfg, kv);
  if (!algorithm.empty()) icql::set_config_key(cfg, "algorithm", algorithm);
  if (!seeds.empty()) icql::set_config_key(cfg, "run.seeds", seeds);
  if (episodes >= 0) icql::set_config_key(cfg, "run.total_episodes", std::to_string(episodes));
  if (!out_dir.empty()) icql::set_config_key(cfg, "run.out_dir", out_dir);
  if (threads >= 0) icql::set_config_key(cfg, "run.threads", std::to_string(threads));
  icql::validate_config(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ICQL multi-agent RL laboratory"};
  app.require_subcommand(1);

  std::string config_file, algorithm, seeds, out_dir;
  std::vector<std::string> overrides;
  long episodes = -1;
  int threads = -1;
  bool quiet = false;

  auto add_config_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_file, "config file (key = value lines)");
    cmd->add_option("--set", overrides, "override, key=value (repeatable)");
    cmd->add_option("--algorithm", algorithm, "iql, iql_intrinsic or icql");
    cmd->add_option("--seeds", seeds, "comma-separated seed list");
    cmd->add_option("--episodes", episodes, "total training episodes");
    cmd->add_option("--threads", threads, "parallel seed workers (0 = auto)");
  };

  auto* run = app.add_subcommand("run", "train every seed of a config");
  add_config_flags(run);
  run->add_option("--out", out_dir, "output directory");
  run->add_flag("--quiet", quiet, "suppress progress output");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint, greedy and decentralized");
  add_config_flags(eval);
  std::string checkpoint_file;
  int eval_episodes = 20;
  uint64_t eval_seed = 0;
  eval->add_option("--checkpoint", checkpoint_file, "checkpoint file")->required();
  eval->add_option("--eval-episodes", eval_episodes, "number of evaluation episodes");
  eval->add_option("--seed", eval_seed, "evaluation RNG seed");

  auto* plot = app.add_subcommand("plot", "learning curves from run directories");
  std::vector<std::string> plot_dirs;
  std::string plot_out = "plots";
  plot->add_option("--dir", plot_dirs, "run directory with metrics_seed*.csv (repeatable)")
      ->required();
  plot->add_option("--out", plot_out, "output directory for figures and aggregate CSVs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const icql::Config cfg = resolve_config(config_file, overrides, algorithm, seeds,
                                              episodes, out_dir, threads);
      icql::run_experiment(cfg, quiet);
      std::cout << "wrote " << cfg.run.seeds.size() << " seed runs to " << cfg.run.out_dir
                << "\n";
    } else if (eval->parsed()) {
      icql::Config cfg = resolve_config(config_file, overrides, algorithm, seeds, episodes,
                                        out_dir, threads);
      auto agent = icql::make_agent_net<float>(
          icql::agent_input_dim(cfg.env.obs_dim(), cfg.env.n_agents),
          cfg.learning.agent_hidden, icql::kNumActions);
      auto central = icql::make_central_net<float>(
          icql::central_input_dim(cfg.env.state_dim(), cfg.env.n_agents),
          cfg.learning.central_hidden, icql::kNumActions);
      icql::load_checkpoint(checkpoint_file, agent, central);
      const auto res = icql::eval_policy(agent, cfg, eval_episodes, icql::Rng(eval_seed));
      std::cout << "episodes " << eval_episodes << " mean_return " << res.mean << " std_err "
                << res.std_err << "\n";
    } else if (plot->parsed()) {
      icql::plot_metrics(plot_dirs, plot_out);
      std::cout << "wrote figures to " << plot_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
