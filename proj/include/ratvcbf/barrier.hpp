#pragma once

#include "plant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ratvcbf {

// Piecewise-linear force corridor. Derivatives are right-hand at breakpoints.
class BoundSchedule {
 public:
  struct Sample {
    double lower, upper;
    double lower_rate, upper_rate;
  };

  BoundSchedule() = default;
  BoundSchedule(std::vector<double> times, std::vector<double> lower, std::vector<double> upper)
      : times_(std::move(times)), lower_(std::move(lower)), upper_(std::move(upper)) {
    if (times_.empty() || times_.size() != lower_.size() || times_.size() != upper_.size())
      throw std::invalid_argument("BoundSchedule: breakpoint arrays must be nonempty and equal length");
    for (std::size_t i = 0; i < times_.size(); ++i) {
      if (!(lower_[i] < upper_[i])) throw std::invalid_argument("BoundSchedule: lower must be below upper");
      if (i > 0 && !(times_[i] > times_[i - 1])) throw std::invalid_argument("BoundSchedule: times not increasing");
    }
  }

  static BoundSchedule constant(double lower, double upper, double t0, double t1) {
    return BoundSchedule({t0, t1}, {lower, lower}, {upper, upper});
  }

  double t_start() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& lower_vals() const { return lower_; }
  const std::vector<double>& upper_vals() const { return upper_; }

  Sample at(double t) const {
    const double tol = 1e-9 * std::max(1.0, std::abs(t));
    if (times_.empty() || t < t_start() - tol || t > t_end() + tol)
      throw std::out_of_range("BoundSchedule: t = " + std::to_string(t) + " outside schedule domain");
    if (times_.size() == 1) return {lower_[0], upper_[0], 0.0, 0.0};
    // segment whose left end is the last breakpoint <= t (snapped by tol)
    auto it = std::upper_bound(times_.begin(), times_.end(), t + tol);
    std::size_t i = static_cast<std::size_t>(std::distance(times_.begin(), it));
    i = std::clamp<std::size_t>(i == 0 ? 0 : i - 1, 0, times_.size() - 2);
    const double span = times_[i + 1] - times_[i];
    const double dl = (lower_[i + 1] - lower_[i]) / span;
    const double du = (upper_[i + 1] - upper_[i]) / span;
    const double s = t - times_[i];
    return {lower_[i] + dl * s, upper_[i] + du * s, dl, du};
  }

 private:
  std::vector<double> times_, lower_, upper_;
};

struct ParamEstimate {
  Vec theta_hat;
  Mat Gamma;
  Vec vartheta;
};

struct BarrierEval {
  double h_r = 0.0;
  Vec dh_dx;
  Vec dh_dtheta;
  double dh_dt = 0.0;
  // corridor and estimated force the value was computed from
  double f_est = 0.0;
  double f_lower = 0.0;
  double f_upper = 0.0;
};

inline double force_box_value(double f, double lower, double upper) { return (f - lower) * (upper - f); }

inline BarrierEval eval_force_box(const SysState& s, const ParamEstimate& est, const BoundSchedule& schedule, double t,
                                  Eigen::Index axis = 0) {
  const Eigen::Index n = s.axes();
  if (est.theta_hat.size() != 2 * n) throw std::invalid_argument("eval_force_box: theta_hat must have 2 entries per axis");
  if (axis < 0 || axis >= n) throw std::invalid_argument("eval_force_box: axis out of range");
  const auto b = schedule.at(t);
  const double k_hat = est.theta_hat[axis];
  const double b_hat = est.theta_hat[n + axis];
  const double p = s.p[axis];
  const double v = s.p_dot[axis];
  const double f = k_hat * p + b_hat * v;
  const double c = b.upper + b.lower - 2.0 * f;

  BarrierEval e;
  e.f_est = f;
  e.f_lower = b.lower;
  e.f_upper = b.upper;
  e.h_r = force_box_value(f, b.lower, b.upper);
  e.dh_dx = Vec::Zero(2 * n);
  e.dh_dx[axis] = c * k_hat;
  e.dh_dx[n + axis] = c * b_hat;
  e.dh_dtheta = Vec::Zero(2 * n);
  e.dh_dtheta[axis] = c * p;
  e.dh_dtheta[n + axis] = c * v;
  e.dh_dt = -b.lower_rate * (b.upper - f) + b.upper_rate * (f - b.lower);
  return e;
}

inline void check_gamma(const Mat& Gamma) {
  if (Gamma.rows() != Gamma.cols() || Gamma.rows() == 0) throw std::invalid_argument("Gamma must be square");
  if (!Gamma.isApprox(Gamma.transpose(), 1e-12)) throw std::invalid_argument("Gamma must be symmetric");
  Eigen::LLT<Mat> llt(Gamma);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("Gamma must be positive definite");
}

// 1/2 vartheta^T Gamma^-1 vartheta
inline double tightening(const ParamEstimate& est) {
  check_gamma(est.Gamma);
  if (est.vartheta.size() != est.Gamma.rows()) throw std::invalid_argument("tightening: dimension mismatch");
  const Vec w = est.Gamma.llt().solve(est.vartheta);
  return 0.5 * est.vartheta.dot(w);
}

// gamma(delta) for alpha(s) = alpha0 s
inline double issf_margin(double delta, double alpha0, double issf_epsilon) {
  if (!(alpha0 > 0.0)) throw std::invalid_argument("issf_margin: alpha0 must be positive");
  if (!(issf_epsilon > 0.0)) throw std::invalid_argument("issf_margin: issf_epsilon must be positive");
  if (delta < 0.0) throw std::invalid_argument("issf_margin: delta must be nonnegative");
  return issf_epsilon * delta * delta / (4.0 * alpha0);
}

inline double min_eigenvalue(const Mat& Gamma) {
  if (Gamma.isDiagonal(0.0)) return Gamma.diagonal().minCoeff();
  return Eigen::SelfAdjointEigenSolver<Mat>(Gamma, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

inline bool gamma_condition_check(const ParamEstimate& est, double h_r) {
  const double err2 = est.vartheta.squaredNorm();
  if (h_r <= 0.0) return err2 == 0.0;
  if (err2 == 0.0) return true;
  return min_eigenvalue(est.Gamma) >= err2 / (2.0 * h_r);
}

}  // namespace ratvcbf
