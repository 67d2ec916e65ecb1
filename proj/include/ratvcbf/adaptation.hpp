#pragma once

#include "barrier.hpp"
#include "smid.hpp"

#include <stdexcept>

namespace ratvcbf {

// safety-oriented update direction, tau = -(dh/dx F(x))^T
inline Vec tau(const BarrierEval& eval, const SysState& s, const PlantShape& shape) {
  const Mat F = regressor_F(s, shape);
  if (eval.dh_dx.size() != F.rows()) throw std::invalid_argument("tau: dimension mismatch");
  return -(F.transpose() * eval.dh_dx);
}

inline Vec lambda_eff(const ParamEstimate& est, const BarrierEval& eval) {
  return est.theta_hat - est.Gamma * eval.dh_dtheta;
}

inline ParamEstimate step_estimator(const ParamEstimate& est, const Vec& tau_dir, double dt, const ParamBox& box) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_estimator: dt must be positive");
  ParamEstimate next = est;
  next.theta_hat = box.clamp(est.theta_hat + dt * (est.Gamma * tau_dir));
  return next;
}

// Realized theta_hat rate over one step, projection included. Equals Gamma tau when nothing clamps.
inline Vec estimator_rate(const ParamEstimate& before, const ParamEstimate& after, double dt) {
  return (after.theta_hat - before.theta_hat) / dt;
}

}  // namespace ratvcbf
