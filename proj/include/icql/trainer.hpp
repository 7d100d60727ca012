#pragma once

#include <memory>
#include <optional>
#include <utility>

#include "icql/agents.hpp"
#include "icql/config.hpp"
#include "icql/env.hpp"
#include "icql/intrinsic.hpp"
#include "icql/learning.hpp"
#include "icql/nn.hpp"
#include "icql/replay.hpp"

namespace icql {

struct IterationMetrics {
  long episode = 0;    // 1-based counter after this iteration
  long env_steps = 0;  // cumulative, after this iteration
  Controller controller = Controller::Decentralized;
  double train_return = 0;
  int length = 0;
  std::optional<double> iql_loss;
  std::optional<double> central_loss;
  double mean_bonus = 0;
  double max_bonus = 0;
  long clamp_count = 0;  // estimator clamps during this episode
  double epsilon = 0;
};

// Owns all mutable training state of one run: both networks with their target
// copies, the optimizers, the uncertainty estimator, the shared replay buffer
// and the RNG streams. One episode is sampled per iteration, with a fair coin
// deciding control between the decentralized agents and the central critic
// (ICQL only), then each learner takes one gradient step on its own sample.
class Trainer {
 public:
  Trainer(const Config& cfg, uint64_t seed)
      : cfg_(cfg),
        env_(cfg.env),
        eps_schedule_{cfg.exploration.eps_start, cfg.exploration.eps_end,
                      cfg.exploration.eps_horizon} {
    validate_config(cfg_);
    uint64_t x = seed;
    Rng init_rng(splitmix64(x));
    env_rng_ = Rng(splitmix64(x));
    policy_rng_ = Rng(splitmix64(x));
    sample_rng_ = Rng(splitmix64(x));

    const int n = cfg_.env.n_agents;
    theta_ = make_agent_net<float>(agent_input_dim(cfg_.env.obs_dim(), n),
                                   cfg_.learning.agent_hidden, kNumActions);
    psi_ = make_central_net<float>(central_input_dim(cfg_.env.state_dim(), n),
                                   cfg_.learning.central_hidden, kNumActions);
    init_uniform(theta_, init_rng);
    init_uniform(psi_, init_rng);
    theta_tgt_ = theta_;
    psi_tgt_ = psi_;
    opt_agent_ = make_rmsprop(theta_, static_cast<float>(cfg_.learning.lr),
                              static_cast<float>(cfg_.learning.rmsprop_rho),
                              static_cast<float>(cfg_.learning.rmsprop_eps));
    opt_central_ = make_rmsprop(psi_, static_cast<float>(cfg_.learning.lr),
                                static_cast<float>(cfg_.learning.rmsprop_rho),
                                static_cast<float>(cfg_.learning.rmsprop_eps));
    if (cfg_.algorithm != Algorithm::IQL) {
      const int dim = cfg_.algorithm == Algorithm::ICQL ? cfg_.learning.central_hidden
                                                        : cfg_.learning.agent_hidden;
      estimator_ = Estimator(dim, cfg_.intrinsic.sigma, cfg_.intrinsic.alpha,
                             cfg_.intrinsic.bias, cfg_.intrinsic.reg, cfg_.intrinsic.bias_mode);
    }
    buffer_ = std::make_unique<ReplayBuffer>(cfg_.learning.buffer_capacity);
  }

  // Runs one full episode under the drawn controller, computing the intrinsic
  // reward online from the features of the next decision point (the estimator
  // is updated with them first, then queried). Advances epsilon by the episode
  // length and appends the episode to the buffer.
  EpisodeRecord sample_episode() {
    const double eps = eps_schedule_.value(env_steps_);
    Controller ctrl = Controller::Decentralized;
    if (cfg_.algorithm == Algorithm::ICQL && policy_rng_.uniform01() < 0.5)
      ctrl = Controller::Central;
    const double central_eps = cfg_.exploration.central_epsilon ? eps : 0.0;
    const int n = cfg_.env.n_agents;

    auto rr = env_.reset(Rng(env_rng_.next()));
    GridState st = std::move(rr.state);
    std::vector<Observation> obs = std::move(rr.obs);
    auto runtimes = make_runtimes<float>(n, cfg_.learning.agent_hidden);

    EpisodeRecord ep;
    ep.controller = ctrl;

    auto select = [&](const DecentralizedDecision<float>& dec, const StateFeatures& feats,
                      const JointAction& prev) {
      JointAction u = ctrl == Controller::Central
                          ? central_act(psi_, feats, dec.greedy, prev,
                                        cfg_.learning.localmax_iterations, central_eps,
                                        policy_rng_)
                          : epsilon_greedy(dec, eps, policy_rng_);
      for (size_t a = 0; a < runtimes.size(); ++a) runtimes[a].last_action = u[a];
      return u;
    };

    StateFeatures feats = env_.global_features(st);
    DecentralizedDecision<float> dec = advance_runtimes(theta_, runtimes, obs);
    JointAction u = select(dec, feats, JointAction(static_cast<size_t>(n), Action::Stay));

    while (true) {
      StepRecord rec;
      rec.obs = obs;
      rec.state = feats;
      rec.actions = u;
      StepResult sr = env_.step(st, u);
      rec.reward = static_cast<float>(sr.reward);
      rec.terminated = sr.terminated;
      rec.truncated = sr.truncated;

      const StateFeatures feats_next = env_.global_features(st);
      DecentralizedDecision<float> dec_next = advance_runtimes(theta_, runtimes, sr.obs);
      JointAction u_next = u;  // executed actions stand in on the final transition
      if (!st.done) u_next = select(dec_next, feats_next, u);

      if (estimator_) {
        std::vector<VecD> phis;
        phis.reserve(static_cast<size_t>(n));
        if (cfg_.algorithm == Algorithm::ICQL) {
          for (int a = 0; a < n; ++a) {
            const auto out = central_forward(
                psi_, central_input<float>(feats_next, u_next, a, u[static_cast<size_t>(a)], n));
            phis.push_back(out.phi.template cast<double>());
          }
        } else {
          for (int a = 0; a < n; ++a)
            phis.push_back(dec_next.phi[static_cast<size_t>(a)].template cast<double>());
        }
        if (cfg_.intrinsic.bonus_before_update) {
          rec.bonus = static_cast<float>(estimator_->bonus(phis));
          estimator_->update(phis);
        } else {
          estimator_->update(phis);
          rec.bonus = static_cast<float>(estimator_->bonus(phis));
        }
      }

      ep.steps.push_back(std::move(rec));
      if (st.done) break;
      obs = std::move(sr.obs);
      feats = feats_next;
      dec = std::move(dec_next);
      u = std::move(u_next);
    }

    env_steps_ += ep.length();
    buffer_->push(EpisodeRecord(ep));
    return ep;
  }

  // Copies the online parameters into the target copies on the configured
  // episode cadence.
  void sync_targets() {
    if (episode_count_ % cfg_.learning.target_sync == 0) {
      theta_tgt_ = theta_;
      psi_tgt_ = psi_;
    }
  }

  IterationMetrics training_iteration() {
    const double eps_used = eps_schedule_.value(env_steps_);
    const long clamps_before = estimator_ ? estimator_->clamp_count() : 0;
    EpisodeRecord ep = sample_episode();
    episode_count_ += 1;

    IterationMetrics m;
    m.episode = episode_count_;
    m.env_steps = env_steps_;
    m.controller = ep.controller;
    m.train_return = ep.env_return();
    m.length = ep.length();
    m.epsilon = eps_used;
    for (const auto& s : ep.steps) {
      m.mean_bonus += s.bonus;
      m.max_bonus = std::max(m.max_bonus, static_cast<double>(s.bonus));
    }
    m.mean_bonus /= std::max(1, ep.length());
    m.clamp_count = estimator_ ? estimator_->clamp_count() - clamps_before : 0;

    if (buffer_->ready(cfg_.learning.batch_size)) {
      const auto batch = buffer_->sample(cfg_.learning.batch_size, sample_rng_);
      const RewardMode mode = cfg_.algorithm == Algorithm::IQL_INTRINSIC
                                  ? RewardMode::EnvPlusIntrinsic
                                  : RewardMode::EnvOnly;
      m.iql_loss = train_iql_step(theta_, theta_tgt_, opt_agent_, batch, cfg_.env.n_agents,
                                  static_cast<float>(cfg_.learning.gamma), mode,
                                  cfg_.learning.grad_clip);
      if (cfg_.algorithm == Algorithm::ICQL) {
        const auto central_batch = cfg_.learning.shared_batch
                                       ? batch
                                       : buffer_->sample(cfg_.learning.batch_size, sample_rng_);
        m.central_loss = train_central_step(
            psi_, psi_tgt_, theta_, opt_central_, central_batch, cfg_.env.n_agents,
            static_cast<float>(cfg_.learning.gamma), static_cast<float>(cfg_.learning.lambda),
            cfg_.learning.localmax_iterations, cfg_.learning.grad_clip);
      }
    }
    sync_targets();
    return m;
  }

  const Config& config() const { return cfg_; }
  const Env& env() const { return env_; }
  const AgentNet<float>& agent_net() const { return theta_; }
  const AgentNet<float>& agent_target_net() const { return theta_tgt_; }
  const CentralNet<float>& central_net() const { return psi_; }
  const CentralNet<float>& central_target_net() const { return psi_tgt_; }
  const ReplayBuffer& buffer() const { return *buffer_; }
  ReplayBuffer& buffer() { return *buffer_; }
  const std::optional<Estimator>& estimator() const { return estimator_; }
  long episode_count() const { return episode_count_; }
  long env_steps() const { return env_steps_; }
  double epsilon() const { return eps_schedule_.value(env_steps_); }

 private:
  Config cfg_;
  Env env_;
  EpsilonSchedule eps_schedule_;
  AgentNet<float> theta_, theta_tgt_;
  CentralNet<float> psi_, psi_tgt_;
  RmsProp<AgentNet<float>, float> opt_agent_;
  RmsProp<CentralNet<float>, float> opt_central_;
  std::optional<Estimator> estimator_;
  std::unique_ptr<ReplayBuffer> buffer_;
  Rng env_rng_, policy_rng_, sample_rng_;
  long episode_count_ = 0;
  long env_steps_ = 0;
};

}  // namespace icql
