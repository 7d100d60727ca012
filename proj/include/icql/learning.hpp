#pragma once

#include <cstdint>
#include <vector>

#include "icql/agents.hpp"
#include "icql/nn.hpp"
#include "icql/replay.hpp"

namespace icql {

enum class RewardMode { EnvOnly, EnvPlusIntrinsic };

// ---- IQL batch --------------------------------------------------------------
//
// A sampled set of episodes laid out for the recurrent net: one sequence per
// (episode, agent), padded to the longest episode with a validity mask.
// Masked steps carry zero inputs and contribute nothing to any loss.

template <class T>
struct IqlBatch {
  int n_agents = 0;
  int batch = 0;
  int t_max = 0;
  std::vector<Mat<T>> X;   // t_max inputs, in_dim x (batch*n_agents); seq = e*n + a
  Eigen::MatrixXi action;  // t_max x S, executed action (Stay on padding)
  Mat<T> reward;           // t_max x S, environment reward (shared per team)
  Mat<T> bonus;            // t_max x S, stored intrinsic reward
  Mat<T> terminal;         // t_max x S, 1 where the step ended the episode
  Eigen::MatrixXi valid;   // t_max x S

  int seqs() const { return batch * n_agents; }
};

template <class T>
IqlBatch<T> build_iql_batch(const std::vector<const EpisodeRecord*>& episodes, int n_agents) {
  IqlBatch<T> b;
  b.n_agents = n_agents;
  b.batch = static_cast<int>(episodes.size());
  for (const auto* ep : episodes) b.t_max = std::max(b.t_max, ep->length());
  const int S = b.seqs();
  const int obs_dim =
      b.batch && !episodes[0]->steps.empty()
          ? static_cast<int>(episodes[0]->steps[0].obs[0].size())
          : 0;
  const int in_dim = agent_input_dim(obs_dim, n_agents);
  b.X.assign(static_cast<size_t>(b.t_max), Mat<T>::Zero(in_dim, S));
  b.action = Eigen::MatrixXi::Constant(b.t_max, S, static_cast<int>(Action::Stay));
  b.reward = Mat<T>::Zero(b.t_max, S);
  b.bonus = Mat<T>::Zero(b.t_max, S);
  b.terminal = Mat<T>::Zero(b.t_max, S);
  b.valid = Eigen::MatrixXi::Zero(b.t_max, S);
  for (int e = 0; e < b.batch; ++e) {
    const EpisodeRecord& ep = *episodes[static_cast<size_t>(e)];
    for (int t = 0; t < ep.length(); ++t) {
      const StepRecord& st = ep.steps[static_cast<size_t>(t)];
      for (int a = 0; a < n_agents; ++a) {
        const int s = e * n_agents + a;
        const Action last =
            t > 0 ? ep.steps[static_cast<size_t>(t - 1)].actions[static_cast<size_t>(a)]
                  : Action::Stay;
        b.X[static_cast<size_t>(t)].col(s) =
            agent_input<T>(st.obs[static_cast<size_t>(a)], last, a, n_agents);
        b.action(t, s) = static_cast<int>(st.actions[static_cast<size_t>(a)]);
        b.reward(t, s) = static_cast<T>(st.reward);
        b.bonus(t, s) = static_cast<T>(st.bonus);
        b.terminal(t, s) = (st.terminated || st.truncated) ? T(1) : T(0);
        b.valid(t, s) = 1;
      }
    }
  }
  return b;
}

// Double-Q targets: y_t = rho_t + gamma * (1-terminal) * q'(argmax_u q(u|.), .)
// evaluated at the next step; truncation bootstraps like a capture (not at all).
template <class T>
Mat<T> iql_targets_from_q(const IqlBatch<T>& b, const std::vector<Mat<T>>& q_online,
                          const std::vector<Mat<T>>& q_target, T gamma, RewardMode mode) {
  Mat<T> y = Mat<T>::Zero(b.t_max, b.seqs());
  for (int t = 0; t < b.t_max; ++t) {
    for (int s = 0; s < b.seqs(); ++s) {
      if (!b.valid(t, s)) continue;
      T rho = b.reward(t, s);
      if (mode == RewardMode::EnvPlusIntrinsic) rho += b.bonus(t, s);
      y(t, s) = rho;
      if (b.terminal(t, s) == T(0)) {
        const int u = argmax_lowest(q_online[static_cast<size_t>(t + 1)].col(s));
        y(t, s) += gamma * q_target[static_cast<size_t>(t + 1)](u, s);
      }
    }
  }
  return y;
}

template <class T>
Mat<T> iql_targets(const IqlBatch<T>& b, const AgentNet<T>& theta, const AgentNet<T>& theta_tgt,
                   T gamma, RewardMode mode) {
  return iql_targets_from_q(b, agent_q_seq(theta, b.X), agent_q_seq(theta_tgt, b.X), gamma, mode);
}

// Masked mean of the squared Bellman residual against fixed targets. Pure
// function of theta so finite differences can probe it; the accumulator never
// drops below double so probes in extended precision stay extended.
template <class T>
using LossAcc = std::conditional_t<(sizeof(T) > sizeof(double)), T, double>;

template <class T>
T iql_loss(const AgentNet<T>& theta, const IqlBatch<T>& b, const Mat<T>& targets) {
  const auto q = agent_q_seq(theta, b.X);
  LossAcc<T> acc = 0;
  long count = 0;
  for (int t = 0; t < b.t_max; ++t)
    for (int s = 0; s < b.seqs(); ++s) {
      if (!b.valid(t, s)) continue;
      const LossAcc<T> d = static_cast<LossAcc<T>>(targets(t, s)) -
                           static_cast<LossAcc<T>>(q[static_cast<size_t>(t)](b.action(t, s), s));
      acc += d * d;
      ++count;
    }
  return static_cast<T>(count ? acc / static_cast<LossAcc<T>>(count) : LossAcc<T>(0));
}

template <class T>
T iql_loss_backward(const AgentNet<T>& theta, const IqlBatch<T>& b, const Mat<T>& targets,
                    AgentNet<T>& grads, AgentSeqCache<T>* reuse_cache = nullptr) {
  AgentSeqCache<T> local;
  AgentSeqCache<T>& cache = reuse_cache ? *reuse_cache : local;
  if (!reuse_cache) agent_forward_seq(theta, b.X, cache);
  long count = 0;
  for (int t = 0; t < b.t_max; ++t) count += b.valid.row(t).sum();
  std::vector<Mat<T>> dQ(static_cast<size_t>(b.t_max),
                         Mat<T>::Zero(theta.num_actions(), b.seqs()));
  double acc = 0;
  for (int t = 0; t < b.t_max; ++t)
    for (int s = 0; s < b.seqs(); ++s) {
      if (!b.valid(t, s)) continue;
      const int u = b.action(t, s);
      const T q = cache.Q[static_cast<size_t>(t)](u, s);
      const T d = q - targets(t, s);
      acc += static_cast<double>(d) * static_cast<double>(d);
      dQ[static_cast<size_t>(t)](u, s) = T(2) * d / static_cast<T>(count);
    }
  agent_backward_seq(theta, cache, dQ, grads);
  return static_cast<T>(count ? acc / static_cast<double>(count) : 0.0);
}

// One optimizer step on Eq-style squared error over a sampled batch. Targets
// are held fixed (stop-gradient); hidden states are rebuilt from zero.
template <class T>
T train_iql_step(AgentNet<T>& theta, const AgentNet<T>& theta_tgt,
                 RmsProp<AgentNet<T>, T>& opt, const std::vector<const EpisodeRecord*>& episodes,
                 int n_agents, T gamma, RewardMode mode, double grad_clip = 0.0) {
  IqlBatch<T> b = build_iql_batch<T>(episodes, n_agents);
  AgentSeqCache<T> cache;
  agent_forward_seq(theta, b.X, cache);
  const Mat<T> y = iql_targets_from_q(b, cache.Q, agent_q_seq(theta_tgt, b.X), gamma, mode);
  AgentNet<T> grads = theta;
  const T loss = iql_loss_backward(theta, b, y, grads, &cache);
  clip_gradients(grads, grad_clip);
  rmsprop_update(theta, grads, opt);
  return loss;
}

// ---- central Q(lambda) targets ----------------------------------------------

// Backward recursion G_t = rho_t + (1-terminal_t)*(1-lambda)*gamma*boot_t
//                         + lambda*gamma*G_{t+1},  G_T = 0,
// per agent column; boot rows at terminal steps are ignored.
template <class T>
Mat<T> lambda_recursion(const std::vector<T>& rho, const Mat<T>& boot,
                        const std::vector<uint8_t>& terminal, T gamma, T lambda) {
  const int steps = static_cast<int>(rho.size());
  const int n = static_cast<int>(boot.cols());
  Mat<T> g = Mat<T>::Zero(steps, n);
  Vec<T> next = Vec<T>::Zero(n);
  for (int t = steps - 1; t >= 0; --t) {
    for (int a = 0; a < n; ++a) {
      T v = rho[static_cast<size_t>(t)] + lambda * gamma * next(a);
      if (!terminal[static_cast<size_t>(t)]) v += (T(1) - lambda) * gamma * boot(t, a);
      g(t, a) = v;
    }
    next = g.row(t).transpose();
  }
  return g;
}

// Double-Q bootstrap for every (episode, non-final step): localmax on the
// online critic selects the joint action at s_{t+1} (seeded with the
// decentralized greedy joint there, previous own action = executed u_t), the
// target critic evaluates it. All pairs share batched forward passes.
template <class T>
std::vector<Mat<T>> central_bootstraps(const std::vector<const EpisodeRecord*>& episodes,
                                       const CentralNet<T>& psi, const CentralNet<T>& psi_tgt,
                                       const std::vector<Eigen::MatrixXi>& dec_greedy,
                                       int iterations) {
  const int n_eps = static_cast<int>(episodes.size());
  const int n = n_eps ? static_cast<int>(episodes[0]->steps[0].actions.size()) : 0;
  std::vector<Mat<T>> boot(static_cast<size_t>(n_eps));
  struct Pair {
    int e, t;  // bootstrap for step t, evaluated at s_{t+1}
  };
  std::vector<Pair> pairs;
  for (int e = 0; e < n_eps; ++e) {
    boot[static_cast<size_t>(e)] = Mat<T>::Zero(episodes[static_cast<size_t>(e)]->length(), n);
    for (int t = 0; t + 1 < episodes[static_cast<size_t>(e)]->length(); ++t)
      pairs.push_back({e, t});
  }
  if (pairs.empty()) return boot;
  const int P = static_cast<int>(pairs.size());

  std::vector<JointAction> joint(static_cast<size_t>(P));
  for (int p = 0; p < P; ++p) {
    const auto& [e, t] = pairs[static_cast<size_t>(p)];
    JointAction j(static_cast<size_t>(n));
    for (int a = 0; a < n; ++a)
      j[static_cast<size_t>(a)] = static_cast<Action>(dec_greedy[static_cast<size_t>(e)](t + 1, a));
    joint[static_cast<size_t>(p)] = std::move(j);
  }

  const int in_dim = psi.in_dim();
  Mat<T> X(in_dim, P);
  auto fill_inputs = [&](int agent) {
    for (int p = 0; p < P; ++p) {
      const auto& [e, t] = pairs[static_cast<size_t>(p)];
      const EpisodeRecord& ep = *episodes[static_cast<size_t>(e)];
      X.col(p) = central_input<T>(ep.steps[static_cast<size_t>(t + 1)].state,
                                  joint[static_cast<size_t>(p)], agent,
                                  ep.steps[static_cast<size_t>(t)].actions[static_cast<size_t>(agent)],
                                  n);
    }
  };
  for (int it = 0; it < iterations; ++it) {
    for (int a = 0; a < n; ++a) {
      fill_inputs(a);
      const Mat<T> q = central_q_batch(psi, X);
      for (int p = 0; p < P; ++p)
        joint[static_cast<size_t>(p)][static_cast<size_t>(a)] =
            static_cast<Action>(argmax_lowest(q.col(p)));
    }
  }
  for (int a = 0; a < n; ++a) {
    fill_inputs(a);
    const Mat<T> q = central_q_batch(psi_tgt, X);
    for (int p = 0; p < P; ++p) {
      const auto& [e, t] = pairs[static_cast<size_t>(p)];
      boot[static_cast<size_t>(e)](t, a) =
          q(static_cast<int>(joint[static_cast<size_t>(p)][static_cast<size_t>(a)]), p);
    }
  }
  return boot;
}

// Per-step, per-agent G^lambda for one episode. The reward is always
// r_t + r+_t: only the central learner sees the intrinsic reward.
template <class T>
Mat<T> lambda_targets(const EpisodeRecord& ep, const CentralNet<T>& psi,
                      const CentralNet<T>& psi_tgt, const Eigen::MatrixXi& dec_greedy,
                      T gamma, T lambda, int iterations) {
  const auto boots = central_bootstraps<T>({&ep}, psi, psi_tgt, {dec_greedy}, iterations);
  std::vector<T> rho(static_cast<size_t>(ep.length()));
  std::vector<uint8_t> term(static_cast<size_t>(ep.length()));
  for (int t = 0; t < ep.length(); ++t) {
    const auto& s = ep.steps[static_cast<size_t>(t)];
    rho[static_cast<size_t>(t)] = static_cast<T>(s.reward) + static_cast<T>(s.bonus);
    term[static_cast<size_t>(t)] = (s.terminated || s.truncated) ? 1 : 0;
  }
  return lambda_recursion(rho, boots[0], term, gamma, lambda);
}

// Greedy decentralized actions along recorded episodes (localmax seeds);
// one T x n matrix per episode.
template <class T>
std::vector<Eigen::MatrixXi> decentralized_greedy_actions(
    const std::vector<const EpisodeRecord*>& episodes, const AgentNet<T>& theta, int n_agents) {
  IqlBatch<T> b = build_iql_batch<T>(episodes, n_agents);
  const auto q = agent_q_seq(theta, b.X);
  std::vector<Eigen::MatrixXi> out;
  out.reserve(episodes.size());
  for (int e = 0; e < b.batch; ++e) {
    const int len = episodes[static_cast<size_t>(e)]->length();
    Eigen::MatrixXi g(len, n_agents);
    for (int t = 0; t < len; ++t)
      for (int a = 0; a < n_agents; ++a)
        g(t, a) = argmax_lowest(q[static_cast<size_t>(t)].col(e * n_agents + a));
    out.push_back(std::move(g));
  }
  return out;
}

// ---- central loss -------------------------------------------------------------

template <class T>
struct CentralLossBatch {
  Mat<T> X;                  // in_dim x P, one column per valid (episode, step, agent)
  std::vector<int> action;   // executed u^a_t
  std::vector<T> target;     // G^lambda
};

template <class T>
CentralLossBatch<T> build_central_loss_batch(const std::vector<const EpisodeRecord*>& episodes,
                                             const std::vector<Mat<T>>& targets, int n_agents,
                                             int in_dim) {
  long total = 0;
  for (const auto* ep : episodes) total += static_cast<long>(ep->length()) * n_agents;
  CentralLossBatch<T> b;
  b.X.resize(in_dim, total);
  b.action.reserve(static_cast<size_t>(total));
  b.target.reserve(static_cast<size_t>(total));
  long col = 0;
  for (size_t e = 0; e < episodes.size(); ++e) {
    const EpisodeRecord& ep = *episodes[e];
    for (int t = 0; t < ep.length(); ++t) {
      const StepRecord& st = ep.steps[static_cast<size_t>(t)];
      for (int a = 0; a < n_agents; ++a) {
        const Action prev =
            t > 0 ? ep.steps[static_cast<size_t>(t - 1)].actions[static_cast<size_t>(a)]
                  : Action::Stay;
        b.X.col(col) = central_input<T>(st.state, st.actions, a, prev, n_agents);
        b.action.push_back(static_cast<int>(st.actions[static_cast<size_t>(a)]));
        b.target.push_back(targets[e](t, a));
        ++col;
      }
    }
  }
  return b;
}

template <class T>
T central_loss(const CentralNet<T>& psi, const CentralLossBatch<T>& b) {
  const Mat<T> q = central_q_batch(psi, b.X);
  LossAcc<T> acc = 0;
  const long P = static_cast<long>(b.action.size());
  for (long p = 0; p < P; ++p) {
    const LossAcc<T> d = static_cast<LossAcc<T>>(b.target[static_cast<size_t>(p)]) -
                         static_cast<LossAcc<T>>(q(b.action[static_cast<size_t>(p)], p));
    acc += d * d;
  }
  return static_cast<T>(P ? acc / static_cast<LossAcc<T>>(P) : LossAcc<T>(0));
}

template <class T>
T central_loss_backward(const CentralNet<T>& psi, const CentralLossBatch<T>& b,
                        CentralNet<T>& grads) {
  CentralBatchCache<T> cache;
  central_forward_batch(psi, b.X, cache);
  const long P = static_cast<long>(b.action.size());
  Mat<T> dQ = Mat<T>::Zero(psi.num_actions(), P);
  double acc = 0;
  for (long p = 0; p < P; ++p) {
    const int u = b.action[static_cast<size_t>(p)];
    const T d = cache.Q(u, p) - b.target[static_cast<size_t>(p)];
    acc += static_cast<double>(d) * static_cast<double>(d);
    dQ(u, p) = T(2) * d / static_cast<T>(P);
  }
  central_backward_batch(psi, cache, dQ, grads);
  return static_cast<T>(P ? acc / static_cast<double>(P) : 0.0);
}

// One optimizer step on the central critic against frozen G^lambda targets.
template <class T>
T train_central_step(CentralNet<T>& psi, const CentralNet<T>& psi_tgt, const AgentNet<T>& theta,
                     RmsProp<CentralNet<T>, T>& opt,
                     const std::vector<const EpisodeRecord*>& episodes, int n_agents, T gamma,
                     T lambda, int localmax_iterations, double grad_clip = 0.0) {
  const auto greedy = decentralized_greedy_actions(episodes, theta, n_agents);
  const auto boots = central_bootstraps<T>(episodes, psi, psi_tgt, greedy, localmax_iterations);
  std::vector<Mat<T>> targets(episodes.size());
  for (size_t e = 0; e < episodes.size(); ++e) {
    const EpisodeRecord& ep = *episodes[e];
    std::vector<T> rho(static_cast<size_t>(ep.length()));
    std::vector<uint8_t> term(static_cast<size_t>(ep.length()));
    for (int t = 0; t < ep.length(); ++t) {
      const auto& s = ep.steps[static_cast<size_t>(t)];
      rho[static_cast<size_t>(t)] = static_cast<T>(s.reward) + static_cast<T>(s.bonus);
      term[static_cast<size_t>(t)] = (s.terminated || s.truncated) ? 1 : 0;
    }
    targets[e] = lambda_recursion(rho, boots[e], term, gamma, lambda);
  }
  const auto batch = build_central_loss_batch<T>(episodes, targets, n_agents, psi.in_dim());
  CentralNet<T> grads = psi;
  const T loss = central_loss_backward(psi, batch, grads);
  clip_gradients(grads, grad_clip);
  rmsprop_update(psi, grads, opt);
  return loss;
}

}  // namespace icql
