#pragma once

#include <algorithm>
#include <vector>

#include "icql/env.hpp"
#include "icql/nn.hpp"
#include "icql/rng.hpp"

namespace icql {

// Ties in every argmax break toward the lowest action index so that greedy
// behavior is deterministic.
template <class Derived>
int argmax_lowest(const Eigen::MatrixBase<Derived>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  long horizon = 20000;  // environment steps

  double value(long env_steps) const {
    if (env_steps >= horizon) return end;
    return std::max(end, start - (start - end) * static_cast<double>(env_steps) /
                              static_cast<double>(horizon));
  }
};

// Per-agent recurrent bookkeeping. The hidden state advances on every
// environment step from (observation, last executed action, id), no matter
// which controller picked the action, so decentralized value estimates stay
// identical across controllers for the same action sequence.
template <class T>
struct AgentRuntime {
  Vec<T> h;
  Action last_action = Action::Stay;  // Stay stands in before the first step
  int id = 0;
};

template <class T>
std::vector<AgentRuntime<T>> make_runtimes(int n_agents, int hidden) {
  std::vector<AgentRuntime<T>> rts(static_cast<size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) {
    rts[static_cast<size_t>(i)].h = Vec<T>::Zero(hidden);
    rts[static_cast<size_t>(i)].id = i;
  }
  return rts;
}

// Decentralized net input: [observation; one-hot last action; one-hot id].
template <class T>
Vec<T> agent_input(const Observation& obs, Action last_action, int agent_id, int n_agents) {
  Vec<T> x = Vec<T>::Zero(static_cast<int>(obs.size()) + kNumActions + n_agents);
  for (size_t i = 0; i < obs.size(); ++i) x[static_cast<int>(i)] = static_cast<T>(obs[i]);
  x[static_cast<int>(obs.size()) + static_cast<int>(last_action)] = T(1);
  x[static_cast<int>(obs.size()) + kNumActions + agent_id] = T(1);
  return x;
}

inline int agent_input_dim(int obs_dim, int n_agents) { return obs_dim + kNumActions + n_agents; }

// Central critic input for agent a:
// [state features; one-hot others' actions in id order skipping a;
//  one-hot own previous action; one-hot id].
template <class T>
Vec<T> central_input(const StateFeatures& state, const JointAction& joint, int agent_id,
                     Action own_prev, int n_agents) {
  const int sd = static_cast<int>(state.size());
  Vec<T> x = Vec<T>::Zero(sd + (n_agents - 1) * kNumActions + kNumActions + n_agents);
  for (int i = 0; i < sd; ++i) x[i] = static_cast<T>(state[static_cast<size_t>(i)]);
  int off = sd;
  for (int other = 0; other < n_agents; ++other) {
    if (other == agent_id) continue;
    x[off + static_cast<int>(joint[static_cast<size_t>(other)])] = T(1);
    off += kNumActions;
  }
  x[off + static_cast<int>(own_prev)] = T(1);
  off += kNumActions;
  x[off + agent_id] = T(1);
  return x;
}

inline int central_input_dim(int state_dim, int n_agents) {
  return state_dim + (n_agents - 1) * kNumActions + kNumActions + n_agents;
}

template <class T>
struct DecentralizedDecision {
  JointAction greedy;           // per-agent argmax, before any exploration
  std::vector<Vec<T>> q;        // per-agent head values
  std::vector<Vec<T>> phi;      // new hidden states, the intrinsic features
};

// Consumes the new observations, advancing every hidden state in place.
// Does not choose actions and does not touch last_action.
template <class T>
DecentralizedDecision<T> advance_runtimes(const AgentNet<T>& net,
                                          std::vector<AgentRuntime<T>>& runtimes,
                                          const std::vector<Observation>& obs) {
  const int n = static_cast<int>(runtimes.size());
  DecentralizedDecision<T> out;
  out.greedy.resize(static_cast<size_t>(n));
  out.q.resize(static_cast<size_t>(n));
  out.phi.resize(static_cast<size_t>(n));
  for (int a = 0; a < n; ++a) {
    auto& rt = runtimes[static_cast<size_t>(a)];
    auto step = agent_forward(
        net, rt.h, agent_input<T>(obs[static_cast<size_t>(a)], rt.last_action, rt.id, n));
    rt.h = step.h;
    out.greedy[static_cast<size_t>(a)] = static_cast<Action>(argmax_lowest(step.q));
    out.q[static_cast<size_t>(a)] = std::move(step.q);
    out.phi[static_cast<size_t>(a)] = rt.h;
  }
  return out;
}

// Independent epsilon-greedy over the per-agent heads.
template <class T>
JointAction epsilon_greedy(const DecentralizedDecision<T>& dec, double epsilon, Rng& rng) {
  JointAction joint = dec.greedy;
  for (auto& a : joint)
    if (rng.uniform01() < epsilon) a = static_cast<Action>(rng.uniform_int(kNumActions));
  return joint;
}

// Advances the runtimes and picks the epsilon-greedy joint action; records it
// as every agent's last action.
template <class T>
std::pair<JointAction, DecentralizedDecision<T>> decentralized_act(
    const AgentNet<T>& net, std::vector<AgentRuntime<T>>& runtimes,
    const std::vector<Observation>& obs, double epsilon, Rng& rng) {
  DecentralizedDecision<T> dec = advance_runtimes(net, runtimes, obs);
  JointAction joint = epsilon_greedy(dec, epsilon, rng);
  for (size_t a = 0; a < runtimes.size(); ++a) runtimes[a].last_action = joint[a];
  return {std::move(joint), std::move(dec)};
}

// Iterative local maximization of a joint critic. eval(agent, joint) must
// return that agent's head values with the other agents' actions read from
// joint. Sweeps visit agents in id order; a replacement is visible to every
// later agent in the same sweep (Gauss-Seidel), which makes each replacement
// an ascent step on the acting agent's own value.
template <class EvalFn>
JointAction localmax(EvalFn&& eval, JointAction init, int iterations) {
  const int n = static_cast<int>(init.size());
  JointAction joint = std::move(init);
  for (int it = 0; it < iterations; ++it) {
    for (int a = 0; a < n; ++a) {
      const auto q = eval(a, joint);
      joint[static_cast<size_t>(a)] = static_cast<Action>(argmax_lowest(q));
    }
  }
  return joint;
}

// localmax over the central critic. prev_joint supplies each agent's previous
// own action input; init_joint is normally the decentralized greedy joint.
template <class T>
JointAction localmax(const CentralNet<T>& net, const StateFeatures& state,
                     const JointAction& init_joint, const JointAction& prev_joint,
                     int iterations) {
  const int n = static_cast<int>(init_joint.size());
  return localmax(
      [&](int agent, const JointAction& joint) {
        return central_forward(net, central_input<T>(state, joint, agent,
                                                     prev_joint[static_cast<size_t>(agent)], n))
            .q;
      },
      init_joint, iterations);
}

// Central controller: localmax seeded with the decentralized greedy joint,
// then an independent epsilon-random replacement per agent.
template <class T>
JointAction central_act(const CentralNet<T>& net, const StateFeatures& state,
                        const JointAction& decentralized_greedy, const JointAction& prev_joint,
                        int iterations, double epsilon, Rng& rng) {
  JointAction joint = localmax(net, state, decentralized_greedy, prev_joint, iterations);
  for (auto& a : joint)
    if (rng.uniform01() < epsilon) a = static_cast<Action>(rng.uniform_int(kNumActions));
  return joint;
}

}  // namespace icql
