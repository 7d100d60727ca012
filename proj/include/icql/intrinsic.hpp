#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "icql/config.hpp"

namespace icql {

using MatD = Eigen::MatrixXd;
using VecD = Eigen::VectorXd;

// Uncertainty estimator behind the collaborative intrinsic reward. Tracks the
// inverse of the decayed feature-correlation matrix
//   C_t = (1-alpha) C_{t-1} + sum_a phi^a phi^a'
// through exponential forgetting plus one Sherman-Morrison rank-one downdate
// per agent feature, so an update costs O(dim^2) instead of O(dim^3).
// The bonus for a feature set is
//   r+ = sigma * max(0, max_a sqrt(phi^a' C^-1 phi^a) - b).
//
// Kept in double regardless of the training precision: with forgetting the
// inverse grows like (1-alpha)^-t along directions the data never refreshes.
class Estimator {
 public:
  Estimator() = default;

  // C_0 = reg * I, so inv_C starts at (1/reg) * I.
  Estimator(int dim, double sigma, double alpha, double bias, double reg,
            BiasMode bias_mode = BiasMode::Constant)
      : dim_(dim),
        sigma_(sigma),
        alpha_(alpha),
        bias_(bias),
        reg_(reg),
        bias_mode_(bias_mode) {
    if (reg <= 0) throw ConfigError("intrinsic.reg must be > 0");
    if (alpha < 0 || alpha >= 1) throw ConfigError("intrinsic.alpha must be in [0,1)");
    if (sigma < 0) throw ConfigError("intrinsic.sigma must be >= 0");
    inv_C_ = MatD::Identity(dim, dim) / reg;
  }

  int dim() const { return dim_; }
  double sigma() const { return sigma_; }
  double bias() const { return bias_; }
  const MatD& inv_C() const { return inv_C_; }
  MatD& inv_C() { return inv_C_; }  // tests poke at it directly
  long clamp_count() const { return clamp_count_; }

  // Decay once, then fold in each agent's feature vector.
  void update(const std::vector<VecD>& features) {
    inv_C_ /= (1.0 - alpha_);
    for (const auto& phi : features) {
      if (phi.size() != dim_) throw std::logic_error("Estimator::update: feature dim mismatch");
      const VecD bphi = inv_C_ * phi;
      const double denom = 1.0 + phi.dot(bphi);
      inv_C_.noalias() -= (bphi * bphi.transpose()) / denom;
      inv_C_ = ((inv_C_ + inv_C_.transpose()) * 0.5).eval();  // bound asymmetry drift
    }
  }

  // Largest uncertainty over the agents, biased and clamped at zero. The
  // radicand is capped at 1/reg, the value a never-visited direction has at
  // initialization: under forgetting, inv_C grows like (1-alpha)^-t along
  // directions the data stops refreshing, and without the cap the emitted
  // bonuses eventually dwarf every reward in the problem.
  double bonus(const std::vector<VecD>& features) {
    double max_unc = 0.0;
    bool any = false;
    for (const auto& phi : features) {
      if (phi.size() != dim_) throw std::logic_error("Estimator::bonus: feature dim mismatch");
      double rad = phi.dot(inv_C_ * phi);
      if (rad < 0.0) {
        ++clamp_count_;
        rad = 0.0;
      }
      rad = std::min(rad, 1.0 / reg_);
      const double unc = std::sqrt(rad);
      if (!any || unc > max_unc) max_unc = unc;
      any = true;
    }
    if (!any) return 0.0;
    const double r = sigma_ * std::max(0.0, max_unc - bias_);
    if (bias_mode_ == BiasMode::Running)
      bias_ = (1.0 - alpha_) * bias_ + alpha_ * max_unc;
    return r;
  }

 private:
  int dim_ = 0;
  double sigma_ = 1.0;
  double alpha_ = 0.0;
  double bias_ = 0.0;
  double reg_ = 1.0;
  BiasMode bias_mode_ = BiasMode::Constant;
  MatD inv_C_;
  long clamp_count_ = 0;
};

// Exact per-action regression variance:
//   sigma_noise^2 * phi' (sum_{i: u_i = u} phi_i phi_i' + reg I)^-1 phi.
// Small-scale oracle used to validate that the action-independent estimator
// coincides with the exact quantity when all data share one action.
inline double exact_eq2_variance(const std::vector<std::pair<VecD, int>>& dataset,
                                 double sigma_noise, const VecD& query, int query_action,
                                 double reg = 1e-4) {
  const auto dim = query.size();
  MatD design = MatD::Identity(dim, dim) * reg;
  for (const auto& [phi, action] : dataset)
    if (action == query_action) design.noalias() += phi * phi.transpose();
  const VecD solved = design.ldlt().solve(query);
  return sigma_noise * sigma_noise * query.dot(solved);
}

}  // namespace icql
