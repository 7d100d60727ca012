#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "icql/config.hpp"
#include "icql/rng.hpp"

namespace icql {

// Bounded grid world on which predators hunt a valley and a mountain prey.
// Row 0 is the valley (bottom), row height-1 the mountain (top); Up increases
// the row index. The mountain is simulated through slips: agents and valley
// prey fail 50% of their Up moves, mountain prey fails 50% of its Down moves.

enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };
inline constexpr int kNumActions = 5;

using JointAction = std::vector<Action>;

struct Pos {
  int row = 0;
  int col = 0;
  bool operator==(const Pos&) const = default;
};

enum class PreyKind { Valley, Mountain };

struct Prey {
  Pos pos;
  PreyKind kind = PreyKind::Valley;
  bool alive = true;
};

// Full simulator state. The generator state is part of it, so identical
// (state, actions) pairs always produce identical successors.
struct GridState {
  std::vector<Pos> agents;
  std::vector<Prey> prey;   // valley first, then mountain
  int step_count = 0;
  bool done = false;
  Rng rng;
};

// 4 binary planes over the (2r+1)^2 agent-centric window, flattened
// plane-major, row-major within a plane:
//   plane 0: other agents (self excluded), plane 1: valley prey,
//   plane 2: mountain prey, plane 3: out-of-bounds cells.
using Observation = std::vector<float>;

// Global state encoding: per agent (row, col) normalized to [0,1]; per prey
// (row, col, alive); then step_count / episode_limit.
using StateFeatures = std::vector<float>;

inline Pos moved(Pos p, Action a) {
  switch (a) {
    case Action::Up: return {p.row + 1, p.col};
    case Action::Down: return {p.row - 1, p.col};
    case Action::Left: return {p.row, p.col - 1};
    case Action::Right: return {p.row, p.col + 1};
    case Action::Stay: return p;
  }
  return p;
}

// The slip is applied to the intended action before any collision handling:
// a failed move becomes Stay regardless of terrain.
inline Action apply_slip(Action a, Action slip_action, double slip_prob, Rng& rng) {
  if (a == slip_action && rng.uniform01() < slip_prob) return Action::Stay;
  return a;
}

struct StepResult {
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  std::vector<Observation> obs;
};

class Env {
 public:
  explicit Env(const EnvConfig& cfg) : cfg_(cfg) {
    if (cfg_.height < 3) throw ConfigError("env.height must be >= 3");
    if (cfg_.width < cfg_.n_agents)
      throw ConfigError("env.width must be >= env.n_agents");
    if (cfg_.n_prey < 1 || cfg_.n_prey > 2) throw ConfigError("env.n_prey must be 1 or 2");
    if (cfg_.n_agents < 1) throw ConfigError("env.n_agents must be >= 1");
  }

  const EnvConfig& config() const { return cfg_; }

  struct ResetResult {
    GridState state;
    std::vector<Observation> obs;
  };

  // Valley prey spawns on row 0, mountain prey on row height-1, each at a
  // uniform-random column; agents spawn on the middle row at distinct
  // uniform-random columns.
  ResetResult reset(Rng stream) const {
    GridState st;
    st.rng = stream;
    st.prey.push_back({{0, st.rng.uniform_int(cfg_.width)}, PreyKind::Valley, true});
    if (cfg_.n_prey == 2)
      st.prey.push_back(
          {{cfg_.height - 1, st.rng.uniform_int(cfg_.width)}, PreyKind::Mountain, true});
    std::vector<int> cols(static_cast<size_t>(cfg_.width));
    std::iota(cols.begin(), cols.end(), 0);
    st.rng.shuffle(cols);
    const int mid = cfg_.height / 2;
    st.agents.reserve(static_cast<size_t>(cfg_.n_agents));
    for (int i = 0; i < cfg_.n_agents; ++i) st.agents.push_back({mid, cols[static_cast<size_t>(i)]});
    return {st, observe_all(st)};
  }

  // One transition. Agents move first in a uniformly shuffled order, then the
  // living prey (valley before mountain) each draw a uniform-random action.
  // Moves out of bounds or into an occupied cell become Stay. Captures are
  // checked after all movement; a capture ends the episode with reward 5
  // (valley) or 10 (mountain), a simultaneous double capture pays 10.
  StepResult step(GridState& st, const JointAction& actions) const {
    if (st.done) throw std::logic_error("Env::step called on a finished episode");
    if (actions.size() != st.agents.size())
      throw std::logic_error("Env::step: joint action has wrong arity");

    std::vector<int> order(st.agents.size());
    std::iota(order.begin(), order.end(), 0);
    st.rng.shuffle(order);
    for (int i : order) {
      Action a = apply_slip(actions[static_cast<size_t>(i)], Action::Up, cfg_.slip, st.rng);
      Pos dst = moved(st.agents[static_cast<size_t>(i)], a);
      if (a != Action::Stay && in_bounds(dst) && !occupied(st, dst))
        st.agents[static_cast<size_t>(i)] = dst;
    }
    if (cfg_.prey_moves) {
      for (auto& p : st.prey) {
        if (!p.alive) continue;
        Action a = static_cast<Action>(st.rng.uniform_int(kNumActions));
        const Action slip_dir = p.kind == PreyKind::Mountain ? Action::Down : Action::Up;
        a = apply_slip(a, slip_dir, cfg_.slip, st.rng);
        Pos dst = moved(p.pos, a);
        if (a != Action::Stay && in_bounds(dst) && !occupied(st, dst)) p.pos = dst;
      }
    }

    StepResult res;
    for (int pi = 0; pi < static_cast<int>(st.prey.size()); ++pi) {
      auto& p = st.prey[static_cast<size_t>(pi)];
      if (p.alive && capture_check(st, pi)) {
        p.alive = false;
        res.terminated = true;
        const double r = p.kind == PreyKind::Mountain ? cfg_.mountain_reward : cfg_.valley_reward;
        res.reward = std::max(res.reward, r);
      }
    }
    st.step_count += 1;
    res.truncated = !res.terminated && st.step_count >= cfg_.episode_limit;
    st.done = res.terminated || res.truncated;
    res.obs = observe_all(st);
    return res;
  }

  // A prey is captured when every orthogonally adjacent cell is out of bounds
  // or holds an agent. The other prey does not block.
  bool capture_check(const GridState& st, int prey_index) const {
    const Pos p = st.prey[static_cast<size_t>(prey_index)].pos;
    const Pos nbs[4] = {{p.row + 1, p.col}, {p.row - 1, p.col},
                        {p.row, p.col - 1}, {p.row, p.col + 1}};
    for (const Pos& nb : nbs) {
      if (!in_bounds(nb)) continue;
      if (!agent_at(st, nb)) return false;
    }
    return true;
  }

  Observation observe(const GridState& st, int agent_id) const {
    const int r = cfg_.obs_radius;
    const int w = 2 * r + 1;
    Observation obs(static_cast<size_t>(cfg_.obs_dim()), 0.0f);
    const Pos self = st.agents[static_cast<size_t>(agent_id)];
    auto window_index = [&](int plane, Pos p) -> int {
      const int wr = p.row - self.row + r;
      const int wc = p.col - self.col + r;
      if (wr < 0 || wr >= w || wc < 0 || wc >= w) return -1;
      return plane * w * w + wr * w + wc;
    };
    for (int i = 0; i < static_cast<int>(st.agents.size()); ++i) {
      if (i == agent_id) continue;
      if (int idx = window_index(0, st.agents[static_cast<size_t>(i)]); idx >= 0)
        obs[static_cast<size_t>(idx)] = 1.0f;
    }
    for (const auto& p : st.prey) {
      if (!p.alive) continue;
      const int plane = p.kind == PreyKind::Valley ? 1 : 2;
      if (int idx = window_index(plane, p.pos); idx >= 0) obs[static_cast<size_t>(idx)] = 1.0f;
    }
    for (int dr = -r; dr <= r; ++dr)
      for (int dc = -r; dc <= r; ++dc) {
        const Pos cell{self.row + dr, self.col + dc};
        if (!in_bounds(cell))
          obs[static_cast<size_t>(3 * w * w + (dr + r) * w + (dc + r))] = 1.0f;
      }
    return obs;
  }

  std::vector<Observation> observe_all(const GridState& st) const {
    std::vector<Observation> all;
    all.reserve(st.agents.size());
    for (int i = 0; i < static_cast<int>(st.agents.size()); ++i) all.push_back(observe(st, i));
    return all;
  }

  StateFeatures global_features(const GridState& st) const {
    StateFeatures f;
    f.reserve(static_cast<size_t>(cfg_.state_dim()));
    auto norm = [](int v, int size) {
      return size > 1 ? static_cast<float>(v) / static_cast<float>(size - 1) : 0.0f;
    };
    for (const auto& a : st.agents) {
      f.push_back(norm(a.row, cfg_.height));
      f.push_back(norm(a.col, cfg_.width));
    }
    for (const auto& p : st.prey) {
      f.push_back(norm(p.pos.row, cfg_.height));
      f.push_back(norm(p.pos.col, cfg_.width));
      f.push_back(p.alive ? 1.0f : 0.0f);
    }
    f.push_back(static_cast<float>(st.step_count) / static_cast<float>(cfg_.episode_limit));
    return f;
  }

  bool in_bounds(Pos p) const {
    return p.row >= 0 && p.row < cfg_.height && p.col >= 0 && p.col < cfg_.width;
  }

 private:
  static bool agent_at(const GridState& st, Pos p) {
    for (const auto& a : st.agents)
      if (a == p) return true;
    return false;
  }

  static bool occupied(const GridState& st, Pos p) {
    if (agent_at(st, p)) return true;
    for (const auto& pr : st.prey)
      if (pr.alive && pr.pos == p) return true;
    return false;
  }

  EnvConfig cfg_;
};

}  // namespace icql
