#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace icql {

inline constexpr const char* kVersion = "icql 0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Algorithm { IQL, IQL_INTRINSIC, ICQL };
enum class BiasMode { Constant, Running };

struct EnvConfig {
  int height = 41;
  int width = 10;
  int n_agents = 4;
  int episode_limit = 100;
  double slip = 0.5;               // failure probability of uphill moves
  double valley_reward = 5.0;
  double mountain_reward = 10.0;
  int obs_radius = 2;              // 5x5 agent-centric window
  int n_prey = 2;                  // 2 = valley + mountain, 1 = valley only
  bool prey_moves = true;          // false pins prey in place (corridor tasks)

  int obs_dim() const {
    const int w = 2 * obs_radius + 1;
    return 4 * w * w;
  }
  int state_dim() const { return 2 * n_agents + 3 * n_prey + 1; }
};

struct LearningConfig {
  double lr = 0.0005;
  double gamma = 0.99;
  int batch_size = 32;
  int buffer_capacity = 200;       // episodes
  int target_sync = 200;           // episodes between target refreshes
  double lambda = 0.8;
  int localmax_iterations = 1;
  double rmsprop_rho = 0.99;
  double rmsprop_eps = 1e-5;
  double grad_clip = 10.0;         // global L2 gradient-norm clip, 0 disables
  int agent_hidden = 64;
  int central_hidden = 128;
  bool shared_batch = false;       // reuse the IQL sample for the central step
};

struct ExplorationConfig {
  double eps_start = 1.0;
  double eps_end = 0.05;
  long eps_horizon = 20000;        // environment steps
  bool central_epsilon = true;     // epsilon overlay on the central controller
};

struct IntrinsicConfig {
  double sigma = 1.0;
  double alpha = 0.0002;
  double bias = 0.01;
  double reg = 1e-4;               // C_0 = reg * I
  BiasMode bias_mode = BiasMode::Constant;
  // true: the bonus for a transition is computed before its features enter
  // C (first visits look maximally uncertain); false: update first, which
  // bounds every bonus by sigma and flattens the novelty signal enough to
  // stall directed exploration on the mountain task.
  bool bonus_before_update = true;
};

struct RunConfig {
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7};
  long total_episodes = 20000;
  int eval_every = 200;            // episodes
  int eval_episodes = 20;
  int checkpoint_every = 5000;     // episodes; final checkpoint always written
  int threads = 0;                 // 0 = one per seed up to hardware threads
  std::string out_dir = "runs/out";
};

struct Config {
  EnvConfig env;
  LearningConfig learning;
  ExplorationConfig exploration;
  IntrinsicConfig intrinsic;
  Algorithm algorithm = Algorithm::ICQL;
  RunConfig run;
};

// ---- value formatting / parsing -------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& key) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError("config key '" + key + "': invalid number '" + s + "'");
  return v;
}

inline long long parse_ll(const std::string& s, const std::string& key) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError("config key '" + key + "': invalid integer '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config key '" + key + "': invalid bool '" + s + "'");
}

}  // namespace detail

inline std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::IQL: return "iql";
    case Algorithm::IQL_INTRINSIC: return "iql_intrinsic";
    case Algorithm::ICQL: return "icql";
  }
  return "icql";
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "iql") return Algorithm::IQL;
  if (s == "iql_intrinsic") return Algorithm::IQL_INTRINSIC;
  if (s == "icql") return Algorithm::ICQL;
  throw ConfigError("config key 'algorithm': unknown value '" + s +
                    "' (expected iql, iql_intrinsic or icql)");
}

inline std::string format_seeds(const std::vector<uint64_t>& seeds) {
  std::string out;
  for (size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(seeds[i]);
  }
  return out;
}

inline std::vector<uint64_t> parse_seeds(const std::string& s) {
  std::vector<uint64_t> seeds;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    seeds.push_back(static_cast<uint64_t>(detail::parse_ll(tok, "run.seeds")));
  }
  if (seeds.empty()) throw ConfigError("config key 'run.seeds': empty list");
  return seeds;
}

// ---- key registry ----------------------------------------------------------

struct ConfigKeyOps {
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

inline const std::map<std::string, ConfigKeyOps>& config_keys() {
  using detail::format_double;
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_ll;
  static const std::map<std::string, ConfigKeyOps> keys = [] {
    std::map<std::string, ConfigKeyOps> m;
    auto iref = [&m](const std::string& k, std::function<int&(Config&)> ref) {
      m[k] = {[k, ref](Config& c, const std::string& v) {
                ref(c) = static_cast<int>(parse_ll(v, k));
              },
              [ref](const Config& c) {
                return std::to_string(ref(const_cast<Config&>(c)));
              }};
    };
    auto lref = [&m](const std::string& k, std::function<long&(Config&)> ref) {
      m[k] = {[k, ref](Config& c, const std::string& v) {
                ref(c) = static_cast<long>(parse_ll(v, k));
              },
              [ref](const Config& c) {
                return std::to_string(ref(const_cast<Config&>(c)));
              }};
    };
    auto dref = [&m](const std::string& k, std::function<double&(Config&)> ref) {
      m[k] = {[k, ref](Config& c, const std::string& v) {
                ref(c) = parse_double(v, k);
              },
              [ref](const Config& c) {
                return format_double(ref(const_cast<Config&>(c)));
              }};
    };
    auto bref = [&m](const std::string& k, std::function<bool&(Config&)> ref) {
      m[k] = {[k, ref](Config& c, const std::string& v) {
                ref(c) = parse_bool(v, k);
              },
              [ref](const Config& c) {
                return ref(const_cast<Config&>(c)) ? "true" : "false";
              }};
    };

    iref("env.height", [](Config& c) -> int& { return c.env.height; });
    iref("env.width", [](Config& c) -> int& { return c.env.width; });
    iref("env.n_agents", [](Config& c) -> int& { return c.env.n_agents; });
    iref("env.episode_limit", [](Config& c) -> int& { return c.env.episode_limit; });
    dref("env.slip", [](Config& c) -> double& { return c.env.slip; });
    dref("env.valley_reward", [](Config& c) -> double& { return c.env.valley_reward; });
    dref("env.mountain_reward", [](Config& c) -> double& { return c.env.mountain_reward; });
    iref("env.obs_radius", [](Config& c) -> int& { return c.env.obs_radius; });
    iref("env.n_prey", [](Config& c) -> int& { return c.env.n_prey; });
    bref("env.prey_moves", [](Config& c) -> bool& { return c.env.prey_moves; });

    dref("learning.lr", [](Config& c) -> double& { return c.learning.lr; });
    dref("learning.gamma", [](Config& c) -> double& { return c.learning.gamma; });
    iref("learning.batch_size", [](Config& c) -> int& { return c.learning.batch_size; });
    iref("learning.buffer_capacity", [](Config& c) -> int& { return c.learning.buffer_capacity; });
    iref("learning.target_sync", [](Config& c) -> int& { return c.learning.target_sync; });
    dref("learning.lambda", [](Config& c) -> double& { return c.learning.lambda; });
    iref("learning.localmax_iterations",
         [](Config& c) -> int& { return c.learning.localmax_iterations; });
    dref("learning.rmsprop_rho", [](Config& c) -> double& { return c.learning.rmsprop_rho; });
    dref("learning.rmsprop_eps", [](Config& c) -> double& { return c.learning.rmsprop_eps; });
    dref("learning.grad_clip", [](Config& c) -> double& { return c.learning.grad_clip; });
    iref("learning.agent_hidden", [](Config& c) -> int& { return c.learning.agent_hidden; });
    iref("learning.central_hidden", [](Config& c) -> int& { return c.learning.central_hidden; });
    bref("learning.shared_batch", [](Config& c) -> bool& { return c.learning.shared_batch; });

    dref("exploration.eps_start", [](Config& c) -> double& { return c.exploration.eps_start; });
    dref("exploration.eps_end", [](Config& c) -> double& { return c.exploration.eps_end; });
    lref("exploration.eps_horizon", [](Config& c) -> long& { return c.exploration.eps_horizon; });
    bref("exploration.central_epsilon",
         [](Config& c) -> bool& { return c.exploration.central_epsilon; });

    dref("intrinsic.sigma", [](Config& c) -> double& { return c.intrinsic.sigma; });
    dref("intrinsic.alpha", [](Config& c) -> double& { return c.intrinsic.alpha; });
    dref("intrinsic.bias", [](Config& c) -> double& { return c.intrinsic.bias; });
    dref("intrinsic.reg", [](Config& c) -> double& { return c.intrinsic.reg; });
    bref("intrinsic.bonus_before_update",
         [](Config& c) -> bool& { return c.intrinsic.bonus_before_update; });
    m["intrinsic.bias_mode"] = {
        [](Config& c, const std::string& v) {
          if (v == "constant") c.intrinsic.bias_mode = BiasMode::Constant;
          else if (v == "running") c.intrinsic.bias_mode = BiasMode::Running;
          else
            throw ConfigError(
                "config key 'intrinsic.bias_mode': unknown value '" + v +
                "' (expected constant or running)");
        },
        [](const Config& c) {
          return c.intrinsic.bias_mode == BiasMode::Constant ? "constant" : "running";
        }};

    m["algorithm"] = {
        [](Config& c, const std::string& v) { c.algorithm = parse_algorithm(v); },
        [](const Config& c) { return algorithm_name(c.algorithm); }};

    m["run.seeds"] = {
        [](Config& c, const std::string& v) { c.run.seeds = parse_seeds(v); },
        [](const Config& c) { return format_seeds(c.run.seeds); }};
    lref("run.total_episodes", [](Config& c) -> long& { return c.run.total_episodes; });
    iref("run.eval_every", [](Config& c) -> int& { return c.run.eval_every; });
    iref("run.eval_episodes", [](Config& c) -> int& { return c.run.eval_episodes; });
    iref("run.checkpoint_every", [](Config& c) -> int& { return c.run.checkpoint_every; });
    iref("run.threads", [](Config& c) -> int& { return c.run.threads; });
    m["run.out_dir"] = {
        [](Config& c, const std::string& v) { c.run.out_dir = v; },
        [](const Config& c) { return c.run.out_dir; }};
    return m;
  }();
  return keys;
}

inline void set_config_key(Config& cfg, const std::string& key, const std::string& value) {
  auto it = config_keys().find(key);
  if (it == config_keys().end())
    throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, value);
}

inline std::string get_config_key(const Config& cfg, const std::string& key) {
  auto it = config_keys().find(key);
  if (it == config_keys().end())
    throw ConfigError("unknown config key '" + key + "'");
  return it->second.get(cfg);
}

// Every key in sorted order, as "key = value" lines.
inline std::string config_to_text(const Config& cfg) {
  std::string out;
  for (const auto& [key, ops] : config_keys()) {
    out += key;
    out += " = ";
    out += ops.get(cfg);
    out += "\n";
  }
  return out;
}

inline std::string strip(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Applies "key = value" lines onto cfg. '#' starts a comment.
inline void apply_config_text(std::istream& in, Config& cfg) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected 'key = value', got '" + line + "'");
    set_config_key(cfg, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
}

inline void apply_config_file(const std::string& path, Config& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  apply_config_text(in, cfg);
}

// "key=value" command line override
inline void apply_override(Config& cfg, const std::string& kv) {
  auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + kv + "': expected key=value");
  set_config_key(cfg, strip(kv.substr(0, eq)), strip(kv.substr(eq + 1)));
}

inline void validate_config(const Config& cfg) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
  };
  const auto& e = cfg.env;
  if (e.height < 3) fail("env.height", "must be >= 3");
  if (e.width < 1) fail("env.width", "must be >= 1");
  if (e.n_agents < 1) fail("env.n_agents", "must be >= 1");
  if (e.width < e.n_agents)
    fail("env.width", "must be >= env.n_agents (agents spawn on distinct cells)");
  if (e.episode_limit < 1) fail("env.episode_limit", "must be >= 1");
  if (e.slip < 0.0 || e.slip > 1.0) fail("env.slip", "must be in [0,1]");
  if (e.obs_radius < 1) fail("env.obs_radius", "must be >= 1");
  if (e.n_prey < 1 || e.n_prey > 2) fail("env.n_prey", "must be 1 or 2");
  const auto& l = cfg.learning;
  if (l.lr <= 0) fail("learning.lr", "must be > 0");
  if (l.gamma < 0 || l.gamma > 1) fail("learning.gamma", "must be in [0,1]");
  if (l.batch_size < 1) fail("learning.batch_size", "must be >= 1");
  if (l.buffer_capacity < l.batch_size)
    fail("learning.buffer_capacity", "must be >= learning.batch_size");
  if (l.target_sync < 1) fail("learning.target_sync", "must be >= 1");
  if (l.lambda < 0 || l.lambda > 1) fail("learning.lambda", "must be in [0,1]");
  if (l.localmax_iterations < 1) fail("learning.localmax_iterations", "must be >= 1");
  if (l.grad_clip < 0) fail("learning.grad_clip", "must be >= 0");
  if (l.agent_hidden < 1) fail("learning.agent_hidden", "must be >= 1");
  if (l.central_hidden < 1) fail("learning.central_hidden", "must be >= 1");
  const auto& x = cfg.exploration;
  if (x.eps_start < 0 || x.eps_start > 1) fail("exploration.eps_start", "must be in [0,1]");
  if (x.eps_end < 0 || x.eps_end > x.eps_start)
    fail("exploration.eps_end", "must be in [0, eps_start]");
  if (x.eps_horizon < 1) fail("exploration.eps_horizon", "must be >= 1");
  const auto& i = cfg.intrinsic;
  if (i.sigma < 0) fail("intrinsic.sigma", "must be >= 0");
  if (i.alpha < 0 || i.alpha >= 1) fail("intrinsic.alpha", "must be in [0,1)");
  if (i.bias < 0) fail("intrinsic.bias", "must be >= 0");
  if (i.reg <= 0) fail("intrinsic.reg", "must be > 0");
  const auto& r = cfg.run;
  if (r.seeds.empty()) fail("run.seeds", "must not be empty");
  if (r.total_episodes < 0) fail("run.total_episodes", "must be >= 0");
  if (r.eval_every < 1) fail("run.eval_every", "must be >= 1");
  if (r.eval_episodes < 1) fail("run.eval_episodes", "must be >= 1");
  if (r.checkpoint_every < 1) fail("run.checkpoint_every", "must be >= 1");
  if (r.threads < 0) fail("run.threads", "must be >= 0");
}

}  // namespace icql
