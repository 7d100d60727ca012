#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "icql/rng.hpp"

namespace icql {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Minimal differentiable kernel for the two fixed value-network shapes:
// a recurrent per-agent net (dense -> GRU -> linear heads) and a feed-forward
// central net (dense relu x2 -> linear heads). Gradients are exact reverse
// mode, including backpropagation through time over whole episodes.
//
// GRU convention, fixed throughout:
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   c = tanh(Wc x + Uc (r.h) + bc)
//   h' = z.h + (1-z).c
// so zero parameters contract the hidden state by exactly 1/2.

template <class T>
struct Dense {
  Mat<T> W;
  Vec<T> b;
};

template <class T>
struct GruCell {
  Mat<T> Wz, Uz, Wr, Ur, Wc, Uc;
  Vec<T> bz, br, bc;
};

template <class T>
struct AgentNet {
  Dense<T> input;  // in_dim -> hidden, relu
  GruCell<T> gru;  // hidden -> hidden
  Dense<T> head;   // hidden -> actions, linear

  int in_dim() const { return static_cast<int>(input.W.cols()); }
  int hidden_dim() const { return static_cast<int>(input.W.rows()); }
  int num_actions() const { return static_cast<int>(head.W.rows()); }
};

template <class T>
struct CentralNet {
  Dense<T> l1;    // in_dim -> hidden, relu
  Dense<T> l2;    // hidden -> hidden, relu
  Dense<T> head;  // hidden -> actions, linear

  int in_dim() const { return static_cast<int>(l1.W.cols()); }
  int hidden_dim() const { return static_cast<int>(l1.W.rows()); }
  int num_actions() const { return static_cast<int>(head.W.rows()); }
};

// f(name, tensor...) over every parameter tensor, in a fixed order shared by
// initialization, the optimizer, checkpoints and gradient checks.
template <class T, class F, class... Rest>
void for_each_tensor(F&& f, AgentNet<T>& n, Rest&... rest) {
  f("agent.input.W", n.input.W, rest.input.W...);
  f("agent.input.b", n.input.b, rest.input.b...);
  f("agent.gru.Wz", n.gru.Wz, rest.gru.Wz...);
  f("agent.gru.Uz", n.gru.Uz, rest.gru.Uz...);
  f("agent.gru.bz", n.gru.bz, rest.gru.bz...);
  f("agent.gru.Wr", n.gru.Wr, rest.gru.Wr...);
  f("agent.gru.Ur", n.gru.Ur, rest.gru.Ur...);
  f("agent.gru.br", n.gru.br, rest.gru.br...);
  f("agent.gru.Wc", n.gru.Wc, rest.gru.Wc...);
  f("agent.gru.Uc", n.gru.Uc, rest.gru.Uc...);
  f("agent.gru.bc", n.gru.bc, rest.gru.bc...);
  f("agent.head.W", n.head.W, rest.head.W...);
  f("agent.head.b", n.head.b, rest.head.b...);
}

template <class T, class F, class... Rest>
void for_each_tensor(F&& f, CentralNet<T>& n, Rest&... rest) {
  f("central.l1.W", n.l1.W, rest.l1.W...);
  f("central.l1.b", n.l1.b, rest.l1.b...);
  f("central.l2.W", n.l2.W, rest.l2.W...);
  f("central.l2.b", n.l2.b, rest.l2.b...);
  f("central.head.W", n.head.W, rest.head.W...);
  f("central.head.b", n.head.b, rest.head.b...);
}

namespace detail {

template <class T>
Mat<T> uniform_mat(int rows, int cols, Rng& rng) {
  const T bound = T(1) / std::sqrt(static_cast<T>(cols));
  Mat<T> m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r)
      m(r, c) = static_cast<T>((2.0 * rng.uniform01() - 1.0)) * bound;
  return m;
}

}  // namespace detail

template <class T>
AgentNet<T> make_agent_net(int in_dim, int hidden, int actions) {
  AgentNet<T> n;
  n.input.W = Mat<T>::Zero(hidden, in_dim);
  n.input.b = Vec<T>::Zero(hidden);
  for (Mat<T>* m : {&n.gru.Wz, &n.gru.Uz, &n.gru.Wr, &n.gru.Ur, &n.gru.Wc, &n.gru.Uc})
    *m = Mat<T>::Zero(hidden, hidden);
  for (Vec<T>* v : {&n.gru.bz, &n.gru.br, &n.gru.bc}) *v = Vec<T>::Zero(hidden);
  n.head.W = Mat<T>::Zero(actions, hidden);
  n.head.b = Vec<T>::Zero(actions);
  return n;
}

template <class T>
CentralNet<T> make_central_net(int in_dim, int hidden, int actions) {
  CentralNet<T> n;
  n.l1.W = Mat<T>::Zero(hidden, in_dim);
  n.l1.b = Vec<T>::Zero(hidden);
  n.l2.W = Mat<T>::Zero(hidden, hidden);
  n.l2.b = Vec<T>::Zero(hidden);
  n.head.W = Mat<T>::Zero(actions, hidden);
  n.head.b = Vec<T>::Zero(actions);
  return n;
}

namespace detail {
inline bool is_bias_name(const char* name) {
  const std::string s(name);
  const auto dot = s.rfind('.');
  return dot != std::string::npos && dot + 1 < s.size() && s[dot + 1] == 'b';
}
}  // namespace detail

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
template <class Net>
void init_uniform(Net& net, Rng& rng) {
  for_each_tensor(
      [&rng](const char* name, auto& t) {
        if (detail::is_bias_name(name)) {
          t.setZero();
        } else {
          using T = typename std::decay_t<decltype(t)>::Scalar;
          t = detail::uniform_mat<T>(static_cast<int>(t.rows()),
                                     static_cast<int>(t.cols()), rng);
        }
      },
      net);
}

template <class Net>
void set_zero(Net& net) {
  for_each_tensor([](const char*, auto& t) { t.setZero(); }, net);
}

template <class To, class From>
AgentNet<To> cast_net(const AgentNet<From>& src) {
  AgentNet<To> dst = make_agent_net<To>(src.in_dim(), src.hidden_dim(), src.num_actions());
  for_each_tensor([](const char*, auto& d, auto& s) { d = s.template cast<To>(); }, dst,
                  const_cast<AgentNet<From>&>(src));
  return dst;
}

template <class To, class From>
CentralNet<To> cast_net(const CentralNet<From>& src) {
  CentralNet<To> dst = make_central_net<To>(src.in_dim(), src.hidden_dim(), src.num_actions());
  for_each_tensor([](const char*, auto& d, auto& s) { d = s.template cast<To>(); }, dst,
                  const_cast<CentralNet<From>&>(src));
  return dst;
}

// ---- single-step forward (action selection) --------------------------------

template <class T>
Vec<T> gru_step(const GruCell<T>& g, const Vec<T>& h, const Vec<T>& x) {
  if (h.size() != g.Uz.cols() || x.size() != g.Wz.cols())
    throw std::logic_error("gru_step: shape mismatch");
  const Vec<T> z = ((g.Wz * x + g.Uz * h + g.bz).array().logistic()).matrix();
  const Vec<T> r = ((g.Wr * x + g.Ur * h + g.br).array().logistic()).matrix();
  const Vec<T> c =
      ((g.Wc * x + g.Uc * (r.array() * h.array()).matrix() + g.bc).array().tanh()).matrix();
  return (z.array() * h.array() + (T(1) - z.array()) * c.array()).matrix();
}

template <class T>
struct AgentStepResult {
  Vec<T> q;
  Vec<T> h;  // new hidden state; also the feature phi for the intrinsic module
};

template <class T>
AgentStepResult<T> agent_forward(const AgentNet<T>& n, const Vec<T>& h, const Vec<T>& x_in) {
  if (x_in.size() != n.in_dim()) throw std::logic_error("agent_forward: input dim mismatch");
  const Vec<T> a = ((n.input.W * x_in + n.input.b).array().max(T(0))).matrix();
  Vec<T> h2 = gru_step(n.gru, h, a);
  return {n.head.W * h2 + n.head.b, std::move(h2)};
}

template <class T>
struct CentralStepResult {
  Vec<T> q;
  Vec<T> phi;  // last hidden layer, feeds the heads
};

template <class T>
CentralStepResult<T> central_forward(const CentralNet<T>& n, const Vec<T>& x) {
  if (x.size() != n.in_dim()) throw std::logic_error("central_forward: input dim mismatch");
  const Vec<T> a1 = ((n.l1.W * x + n.l1.b).array().max(T(0))).matrix();
  Vec<T> a2 = ((n.l2.W * a1 + n.l2.b).array().max(T(0))).matrix();
  return {n.head.W * a2 + n.head.b, std::move(a2)};
}

// ---- batched sequence passes (training) ------------------------------------
//
// Sequences are matrix columns; step t of the whole batch is one GEMM.
// Padded steps carry zero inputs; as long as their loss gradient is zero the
// backward recursion keeps their hidden-state gradient exactly zero too.

template <class T>
struct AgentSeqCache {
  std::vector<Mat<T>> X;  // inputs per step, in_dim x S
  std::vector<Mat<T>> A;  // relu(input layer)
  std::vector<Mat<T>> Z, R, C, H;
  std::vector<Mat<T>> Q;
};

template <class T>
void agent_forward_seq(const AgentNet<T>& n, std::vector<Mat<T>> X, AgentSeqCache<T>& cache) {
  const int steps = static_cast<int>(X.size());
  const int S = steps ? static_cast<int>(X[0].cols()) : 0;
  const int H = n.hidden_dim();
  cache.X = std::move(X);
  cache.A.assign(static_cast<size_t>(steps), {});
  cache.Z.assign(static_cast<size_t>(steps), {});
  cache.R.assign(static_cast<size_t>(steps), {});
  cache.C.assign(static_cast<size_t>(steps), {});
  cache.H.assign(static_cast<size_t>(steps), {});
  cache.Q.assign(static_cast<size_t>(steps), {});
  Mat<T> h_prev = Mat<T>::Zero(H, S);
  for (int t = 0; t < steps; ++t) {
    Mat<T>& A = cache.A[static_cast<size_t>(t)];
    A = ((n.input.W * cache.X[static_cast<size_t>(t)]).colwise() + n.input.b)
            .array()
            .max(T(0))
            .matrix();
    Mat<T>& Z = cache.Z[static_cast<size_t>(t)];
    Mat<T>& R = cache.R[static_cast<size_t>(t)];
    Mat<T>& C = cache.C[static_cast<size_t>(t)];
    Z = (((n.gru.Wz * A + n.gru.Uz * h_prev).colwise() + n.gru.bz).array().logistic()).matrix();
    R = (((n.gru.Wr * A + n.gru.Ur * h_prev).colwise() + n.gru.br).array().logistic()).matrix();
    const Mat<T> rh = (R.array() * h_prev.array()).matrix();
    C = (((n.gru.Wc * A + n.gru.Uc * rh).colwise() + n.gru.bc).array().tanh()).matrix();
    Mat<T>& Hm = cache.H[static_cast<size_t>(t)];
    Hm = (Z.array() * h_prev.array() + (T(1) - Z.array()) * C.array()).matrix();
    cache.Q[static_cast<size_t>(t)] = (n.head.W * Hm).colwise() + n.head.b;
    h_prev = Hm;
  }
}

// Head outputs only, for unrolls that do not need gradients (target nets).
template <class T>
std::vector<Mat<T>> agent_q_seq(const AgentNet<T>& n, const std::vector<Mat<T>>& X) {
  const int steps = static_cast<int>(X.size());
  const int S = steps ? static_cast<int>(X[0].cols()) : 0;
  std::vector<Mat<T>> Q(static_cast<size_t>(steps));
  Mat<T> h = Mat<T>::Zero(n.hidden_dim(), S);
  for (int t = 0; t < steps; ++t) {
    const auto i = static_cast<size_t>(t);
    const Mat<T> A =
        (((n.input.W * X[i]).colwise() + n.input.b).array().max(T(0))).matrix();
    const Mat<T> Z =
        (((n.gru.Wz * A + n.gru.Uz * h).colwise() + n.gru.bz).array().logistic()).matrix();
    const Mat<T> R =
        (((n.gru.Wr * A + n.gru.Ur * h).colwise() + n.gru.br).array().logistic()).matrix();
    const Mat<T> rh = (R.array() * h.array()).matrix();
    const Mat<T> C =
        (((n.gru.Wc * A + n.gru.Uc * rh).colwise() + n.gru.bc).array().tanh()).matrix();
    h = (Z.array() * h.array() + (T(1) - Z.array()) * C.array()).matrix();
    Q[i] = (n.head.W * h).colwise() + n.head.b;
  }
  return Q;
}

// Reverse-mode pass over a recorded forward computation. dQ holds the loss
// gradient on every head output; grads must be shaped like the net.
template <class T>
void agent_backward_seq(const AgentNet<T>& n, const AgentSeqCache<T>& cache,
                        const std::vector<Mat<T>>& dQ, AgentNet<T>& grads) {
  set_zero(grads);
  const int steps = static_cast<int>(cache.X.size());
  if (!steps) return;
  const int S = static_cast<int>(cache.X[0].cols());
  const int H = n.hidden_dim();
  Mat<T> dH_carry = Mat<T>::Zero(H, S);
  const Mat<T> zero_h = Mat<T>::Zero(H, S);
  for (int t = steps - 1; t >= 0; --t) {
    const auto i = static_cast<size_t>(t);
    const Mat<T>& h_prev = t > 0 ? cache.H[i - 1] : zero_h;
    const Mat<T>& Z = cache.Z[i];
    const Mat<T>& R = cache.R[i];
    const Mat<T>& C = cache.C[i];
    const Mat<T>& A = cache.A[i];

    grads.head.W.noalias() += dQ[i] * cache.H[i].transpose();
    grads.head.b += dQ[i].rowwise().sum();
    Mat<T> dH = n.head.W.transpose() * dQ[i] + dH_carry;

    const Mat<T> dZ = (dH.array() * (h_prev.array() - C.array())).matrix();
    const Mat<T> dC = (dH.array() * (T(1) - Z.array())).matrix();
    Mat<T> dHprev = (dH.array() * Z.array()).matrix();

    const Mat<T> dcpre = (dC.array() * (T(1) - C.array().square())).matrix();
    const Mat<T> rh = (R.array() * h_prev.array()).matrix();
    grads.gru.Wc.noalias() += dcpre * A.transpose();
    grads.gru.Uc.noalias() += dcpre * rh.transpose();
    grads.gru.bc += dcpre.rowwise().sum();
    const Mat<T> dRH = n.gru.Uc.transpose() * dcpre;
    const Mat<T> dR = (dRH.array() * h_prev.array()).matrix();
    dHprev += (dRH.array() * R.array()).matrix();

    const Mat<T> drpre = (dR.array() * R.array() * (T(1) - R.array())).matrix();
    grads.gru.Wr.noalias() += drpre * A.transpose();
    grads.gru.Ur.noalias() += drpre * h_prev.transpose();
    grads.gru.br += drpre.rowwise().sum();
    dHprev.noalias() += n.gru.Ur.transpose() * drpre;

    const Mat<T> dzpre = (dZ.array() * Z.array() * (T(1) - Z.array())).matrix();
    grads.gru.Wz.noalias() += dzpre * A.transpose();
    grads.gru.Uz.noalias() += dzpre * h_prev.transpose();
    grads.gru.bz += dzpre.rowwise().sum();
    dHprev.noalias() += n.gru.Uz.transpose() * dzpre;

    Mat<T> dA = n.gru.Wz.transpose() * dzpre;
    dA.noalias() += n.gru.Wr.transpose() * drpre;
    dA.noalias() += n.gru.Wc.transpose() * dcpre;
    const Mat<T> dP = (dA.array() * (A.array() > T(0)).template cast<T>()).matrix();
    grads.input.W.noalias() += dP * cache.X[i].transpose();
    grads.input.b += dP.rowwise().sum();

    dH_carry = std::move(dHprev);
  }
}

template <class T>
struct CentralBatchCache {
  Mat<T> X, A1, A2, Q;
};

template <class T>
void central_forward_batch(const CentralNet<T>& n, const Mat<T>& X, CentralBatchCache<T>& cache) {
  cache.X = X;
  cache.A1 = (((n.l1.W * X).colwise() + n.l1.b).array().max(T(0))).matrix();
  cache.A2 = (((n.l2.W * cache.A1).colwise() + n.l2.b).array().max(T(0))).matrix();
  cache.Q = (n.head.W * cache.A2).colwise() + n.head.b;
}

template <class T>
Mat<T> central_q_batch(const CentralNet<T>& n, const Mat<T>& X) {
  const Mat<T> a1 = (((n.l1.W * X).colwise() + n.l1.b).array().max(T(0))).matrix();
  const Mat<T> a2 = (((n.l2.W * a1).colwise() + n.l2.b).array().max(T(0))).matrix();
  return (n.head.W * a2).colwise() + n.head.b;
}

template <class T>
void central_backward_batch(const CentralNet<T>& n, const CentralBatchCache<T>& cache,
                            const Mat<T>& dQ, CentralNet<T>& grads) {
  set_zero(grads);
  grads.head.W.noalias() += dQ * cache.A2.transpose();
  grads.head.b += dQ.rowwise().sum();
  Mat<T> dA2 = n.head.W.transpose() * dQ;
  dA2 = (dA2.array() * (cache.A2.array() > T(0)).template cast<T>()).matrix();
  grads.l2.W.noalias() += dA2 * cache.A1.transpose();
  grads.l2.b += dA2.rowwise().sum();
  Mat<T> dA1 = n.l2.W.transpose() * dA2;
  dA1 = (dA1.array() * (cache.A1.array() > T(0)).template cast<T>()).matrix();
  grads.l1.W.noalias() += dA1 * cache.X.transpose();
  grads.l1.b += dA1.rowwise().sum();
}

// ---- optimizer --------------------------------------------------------------

// RMSprop: moment <- rho*moment + (1-rho)*grad^2;
//          param  <- param - lr*grad / (sqrt(moment) + eps)
template <class Net, class T>
struct RmsProp {
  Net moments;
  T lr = T(0.0005);
  T rho = T(0.99);
  T eps = T(1e-5);
};

template <class Net, class T>
RmsProp<Net, T> make_rmsprop(const Net& shape, T lr, T rho, T eps) {
  RmsProp<Net, T> opt;
  opt.moments = shape;
  set_zero(opt.moments);
  opt.lr = lr;
  opt.rho = rho;
  opt.eps = eps;
  return opt;
}

// Global L2 gradient-norm clipping; returns the pre-clip norm. max_norm <= 0
// disables clipping.
template <class Net>
double clip_gradients(Net& grads, double max_norm) {
  double sq = 0.0;
  for_each_tensor(
      [&sq](const char*, auto& g) { sq += static_cast<double>(g.array().square().sum()); },
      grads);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for_each_tensor(
        [scale](const char*, auto& g) {
          using S = typename std::decay_t<decltype(g)>::Scalar;
          g *= static_cast<S>(scale);
        },
        grads);
  }
  return norm;
}

template <class Net, class T>
void rmsprop_update(Net& params, const Net& grads, RmsProp<Net, T>& opt) {
  for_each_tensor(
      [&opt](const char*, auto& p, auto& g, auto& m) {
        m.array() = opt.rho * m.array() + (T(1) - opt.rho) * g.array().square();
        p.array() -= opt.lr * g.array() / (m.array().sqrt() + opt.eps);
      },
      params, const_cast<Net&>(grads), opt.moments);
}

// ---- finite-difference verification -----------------------------------------

// Max over parameters of |analytic - numeric| / max(1e-8, |analytic|+|numeric|),
// with central differences of loss_fn. Intended for small instances in double;
// a loss_fn returning long double tightens the difference quotient further.
// The loss goes through a type-erased call so the optimizer cannot fold the
// two perturbed evaluations together (observed with -march=native).
template <class Net, class LossFn>
double grad_check(Net& params, const Net& analytic, LossFn&& raw_loss_fn, double fd_eps = 1e-5) {
  using R = std::invoke_result_t<LossFn&>;  // difference in the loss's precision
  const std::function<R()> loss_fn = [&raw_loss_fn]() { return raw_loss_fn(); };
  double worst = 0.0;
  for_each_tensor(
      [&](const char*, auto& p, auto& g) {
        using T = typename std::decay_t<decltype(p)>::Scalar;
        for (Eigen::Index i = 0; i < p.size(); ++i) {
          const T saved = p.data()[i];
          p.data()[i] = saved + static_cast<T>(fd_eps);
          const R up = loss_fn();
          p.data()[i] = saved - static_cast<T>(fd_eps);
          const R down = loss_fn();
          p.data()[i] = saved;
          const double numeric = static_cast<double>((up - down) / (R(2) * static_cast<R>(fd_eps)));
          const double a = static_cast<double>(g.data()[i]);
          const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
          worst = std::max(worst, err);
        }
      },
      params, const_cast<Net&>(analytic));
  return worst;
}

}  // namespace icql
