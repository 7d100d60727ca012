#pragma once

#include <cmath>
#include <vector>

#include "icql/nn.hpp"

// Straight-line re-implementations of the network forward passes, written as
// scalar loops against the documented gate equations. These stay independent
// of the Eigen expression paths they are used to check.

namespace testoracles {

using icql::AgentNet;
using icql::CentralNet;
using icql::GruCell;

inline std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline std::vector<double> affine(const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                                  const std::vector<double>& x) {
  std::vector<double> out(static_cast<size_t>(W.rows()), 0.0);
  for (int r = 0; r < W.rows(); ++r) {
    double acc = b.size() ? b(r) : 0.0;
    for (int c = 0; c < W.cols(); ++c) acc += W(r, c) * x[static_cast<size_t>(c)];
    out[static_cast<size_t>(r)] = acc;
  }
  return out;
}

inline double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline std::vector<double> scalar_gru_step(const GruCell<double>& g,
                                           const std::vector<double>& h,
                                           const std::vector<double>& x) {
  const size_t H = h.size();
  std::vector<double> z(H), r(H), c(H), out(H);
  const auto wzx = affine(g.Wz, g.bz, x);
  const auto uzh = affine(g.Uz, Eigen::VectorXd(), h);
  const auto wrx = affine(g.Wr, g.br, x);
  const auto urh = affine(g.Ur, Eigen::VectorXd(), h);
  for (size_t i = 0; i < H; ++i) {
    z[i] = logistic(wzx[i] + uzh[i]);
    r[i] = logistic(wrx[i] + urh[i]);
  }
  std::vector<double> rh(H);
  for (size_t i = 0; i < H; ++i) rh[i] = r[i] * h[i];
  const auto wcx = affine(g.Wc, g.bc, x);
  const auto ucrh = affine(g.Uc, Eigen::VectorXd(), rh);
  for (size_t i = 0; i < H; ++i) {
    c[i] = std::tanh(wcx[i] + ucrh[i]);
    out[i] = z[i] * h[i] + (1.0 - z[i]) * c[i];
  }
  return out;
}

struct ScalarAgentOut {
  std::vector<double> q;
  std::vector<double> h;
};

inline ScalarAgentOut scalar_agent_forward(const AgentNet<double>& n,
                                           const std::vector<double>& h,
                                           const std::vector<double>& x) {
  auto a = affine(n.input.W, n.input.b, x);
  for (auto& v : a) v = std::max(0.0, v);
  auto h2 = scalar_gru_step(n.gru, h, a);
  return {affine(n.head.W, n.head.b, h2), h2};
}

struct ScalarCentralOut {
  std::vector<double> q;
  std::vector<double> phi;
};

inline ScalarCentralOut scalar_central_forward(const CentralNet<double>& n,
                                               const std::vector<double>& x) {
  auto a1 = affine(n.l1.W, n.l1.b, x);
  for (auto& v : a1) v = std::max(0.0, v);
  auto a2 = affine(n.l2.W, n.l2.b, a1);
  for (auto& v : a2) v = std::max(0.0, v);
  return {affine(n.head.W, n.head.b, a2), a2};
}

// Random nets via the library initializer (values are immaterial to the
// oracle, only the evaluation path matters).
inline AgentNet<double> random_agent_net(int in, int hidden, int actions, icql::Rng& rng) {
  auto net = icql::make_agent_net<double>(in, hidden, actions);
  icql::init_uniform(net, rng);
  icql::for_each_tensor(
      [&rng](const char* name, auto& t) {
        if (icql::detail::is_bias_name(name))
          for (Eigen::Index i = 0; i < t.size(); ++i)
            t.data()[i] = 0.2 * (2.0 * rng.uniform01() - 1.0);
      },
      net);
  return net;
}

inline CentralNet<double> random_central_net(int in, int hidden, int actions, icql::Rng& rng) {
  auto net = icql::make_central_net<double>(in, hidden, actions);
  icql::init_uniform(net, rng);
  icql::for_each_tensor(
      [&rng](const char* name, auto& t) {
        if (icql::detail::is_bias_name(name))
          for (Eigen::Index i = 0; i < t.size(); ++i)
            t.data()[i] = 0.2 * (2.0 * rng.uniform01() - 1.0);
      },
      net);
  return net;
}

}  // namespace testoracles
