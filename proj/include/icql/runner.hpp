#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "icql/checkpoint.hpp"
#include "icql/config.hpp"
#include "icql/metrics.hpp"
#include "icql/trainer.hpp"

namespace icql {

// ---- evaluation --------------------------------------------------------------
//
// Test performance is always 100% decentralized and greedy: fresh
// environments, epsilon = 0, undiscounted episode returns.

struct EvalResult {
  double mean = 0;
  double std_err = 0;
  std::vector<double> returns;
};

// Greedy decentralized policy over a parameter snapshot.
struct GreedyNetPolicy {
  const AgentNet<float>* net = nullptr;
  int n_agents = 0;
  std::vector<AgentRuntime<float>> runtimes;

  void begin_episode() { runtimes = make_runtimes<float>(n_agents, net->hidden_dim()); }

  JointAction operator()(const GridState&, const std::vector<Observation>& obs) {
    auto dec = advance_runtimes(*net, runtimes, obs);
    for (size_t a = 0; a < runtimes.size(); ++a) runtimes[a].last_action = dec.greedy[a];
    return dec.greedy;
  }
};

template <class Policy>
EvalResult evaluate_policy(const Env& env, Policy&& policy, int episodes, Rng rng) {
  EvalResult res;
  RunningStat stat;
  for (int i = 0; i < episodes; ++i) {
    policy.begin_episode();
    auto rr = env.reset(Rng(rng.next()));
    GridState st = std::move(rr.state);
    std::vector<Observation> obs = std::move(rr.obs);
    double ret = 0;
    while (!st.done) {
      const JointAction u = policy(st, obs);
      StepResult sr = env.step(st, u);
      ret += sr.reward;
      obs = std::move(sr.obs);
    }
    res.returns.push_back(ret);
    stat.add(ret);
  }
  res.mean = stat.mean();
  res.std_err = stat.std_err();
  return res;
}

inline EvalResult eval_policy(const AgentNet<float>& net, const Config& cfg, int episodes,
                              Rng rng) {
  Env env(cfg.env);
  GreedyNetPolicy policy{&net, cfg.env.n_agents, {}};
  return evaluate_policy(env, policy, episodes, rng);
}

// ---- experiment runner ---------------------------------------------------------

inline std::string metrics_csv_path(const std::string& out_dir, uint64_t seed) {
  return out_dir + "/metrics_seed" + std::to_string(seed) + ".csv";
}

inline std::string checkpoint_path(const std::string& out_dir, uint64_t seed,
                                   const std::string& tag) {
  return out_dir + "/checkpoint_seed" + std::to_string(seed) + "_" + tag + ".icql";
}

inline void write_manifest(const Config& cfg, const std::string& out_dir) {
  std::ofstream out(out_dir + "/manifest.txt");
  if (!out) throw ConfigError("cannot write manifest in '" + out_dir + "'");
  out << "version = " << kVersion << "\n";
  out << config_to_text(cfg);
  if (!out) throw ConfigError("failed writing manifest in '" + out_dir + "'");
}

inline Rng eval_rng_for(uint64_t seed, long episode) {
  uint64_t x = seed ^ 0x6576616cULL;  // distinct stream family per seed
  splitmix64(x);
  x ^= static_cast<uint64_t>(episode);
  return Rng(splitmix64(x));
}

// Trains one seed to completion, appending one metrics row per episode and
// evaluating the decentralized greedy policy every eval_every episodes.
// progress, if non-null, is called after every iteration.
inline void run_seed(const Config& cfg, uint64_t seed, const std::string& out_dir,
                     const std::function<void(uint64_t, long)>& progress = {}) {
  Trainer trainer(cfg, seed);
  std::ofstream csv(metrics_csv_path(out_dir, seed));
  if (!csv) throw ConfigError("cannot write metrics CSV in '" + out_dir + "'");
  csv << metrics_csv_header() << "\n";
  for (long episode = 1; episode <= cfg.run.total_episodes; ++episode) {
    IterationMetrics it = trainer.training_iteration();
    MetricsRow row = to_metrics_row(it, seed);
    if (episode % cfg.run.eval_every == 0) {
      const EvalResult ev = eval_policy(trainer.agent_net(), cfg, cfg.run.eval_episodes,
                                        eval_rng_for(seed, episode));
      row.eval_mean = ev.mean;
      row.eval_stderr = ev.std_err;
    }
    csv << metrics_row_to_csv(row) << "\n";
    if (episode % cfg.run.checkpoint_every == 0)
      save_checkpoint(checkpoint_path(out_dir, seed, "ep" + std::to_string(episode)),
                      trainer.agent_net(), trainer.central_net(),
                      {{"seed", std::to_string(seed)},
                       {"episode", std::to_string(episode)},
                       {"algorithm", algorithm_name(cfg.algorithm)}});
    if (progress) progress(seed, episode);
  }
  save_checkpoint(checkpoint_path(out_dir, seed, "final"), trainer.agent_net(),
                  trainer.central_net(),
                  {{"seed", std::to_string(seed)},
                   {"episode", std::to_string(cfg.run.total_episodes)},
                   {"algorithm", algorithm_name(cfg.algorithm)}});
  if (!csv) throw ConfigError("failed writing metrics CSV in '" + out_dir + "'");
}

// Runs every configured seed, in parallel workers when asked to. Each seed is
// a fully independent training run writing its own CSV, so scheduling cannot
// change any output byte.
inline void run_experiment(const Config& cfg, bool quiet = false) {
  validate_config(cfg);
  std::filesystem::create_directories(cfg.run.out_dir);
  write_manifest(cfg, cfg.run.out_dir);

  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  int workers = cfg.run.threads > 0 ? cfg.run.threads : std::max(1, hw);
  workers = std::min<int>(workers, static_cast<int>(cfg.run.seeds.size()));

  std::mutex io_mutex;
  auto progress = [&](uint64_t seed, long episode) {
    if (quiet) return;
    if (episode % 1000 != 0 && episode != cfg.run.total_episodes) return;
    std::lock_guard<std::mutex> lock(io_mutex);
    std::cerr << "[" << algorithm_name(cfg.algorithm) << " seed " << seed << "] episode "
              << episode << "/" << cfg.run.total_episodes << "\n";
  };

  std::vector<std::thread> pool;
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(cfg.run.seeds.size());
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= cfg.run.seeds.size()) return;
        try {
          run_seed(cfg, cfg.run.seeds[i], cfg.run.out_dir, progress);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace icql
