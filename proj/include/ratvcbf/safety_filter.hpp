#pragma once

#include "adaptation.hpp"
#include "barrier.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ratvcbf {

enum class FilterMode { TVCBF, RaTVCBF, RaTVCBF_SMID };

inline std::string mode_name(FilterMode m) {
  switch (m) {
    case FilterMode::TVCBF: return "tvcbf";
    case FilterMode::RaTVCBF: return "ratvcbf";
    case FilterMode::RaTVCBF_SMID: return "ratvcbf-smid";
  }
  return "?";
}

inline FilterMode parse_mode(const std::string& s) {
  if (s == "tvcbf") return FilterMode::TVCBF;
  if (s == "ratvcbf") return FilterMode::RaTVCBF;
  if (s == "ratvcbf-smid" || s == "ratvcbf_smid") return FilterMode::RaTVCBF_SMID;
  throw std::invalid_argument("unknown filter mode '" + s + "'");
}

inline bool is_adaptive(FilterMode m) { return m != FilterMode::TVCBF; }

struct InputBox {
  Vec lower;
  Vec upper;
};

struct FilterConfig {
  FilterMode mode = FilterMode::RaTVCBF;
  double alpha0 = 20.0;
  double C = 0.0;
  double delta = 0.0;
  double issf_epsilon = 1.0;
  std::optional<InputBox> input_box;
};

inline void validate(const FilterConfig& cfg) {
  if (!(cfg.alpha0 > 0.0)) throw std::invalid_argument("FilterConfig: alpha0 must be positive");
  if (!(cfg.delta >= 0.0)) throw std::invalid_argument("FilterConfig: delta must be nonnegative");
  if (!(cfg.issf_epsilon > 0.0)) throw std::invalid_argument("FilterConfig: issf_epsilon must be positive");
  if (cfg.input_box && (cfg.input_box->lower.array() >= cfg.input_box->upper.array()).any())
    throw std::invalid_argument("FilterConfig: input box needs u_min < u_max");
}

// a . u >= b, plus the quantities that went into b
struct Constraint {
  Vec a;
  double b = 0.0;
  double robust_h = 0.0;
  double tightening = 0.0;
  double gamma = 0.0;
  double eta = 0.0;
};

struct FilterResult {
  Vec u_safe;
  Vec a;
  double b = 0.0;
  bool active = false;
  bool infeasible = false;
  double slack = 0.0;
};

// theta_rate: realized estimator rate over the coming step (projection included). When absent the
// adaptation term uses lambda = theta_hat - Gamma dh/dtheta^T.
inline Constraint assemble_constraint(const BarrierEval& eval, const ParamEstimate& est, const SysState& s, double t,
                                      const FilterConfig& cfg, const PlantShape& shape,
                                      const Vec* theta_rate = nullptr) {
  (void)t;  // eval already carries the time partial
  const Mat g = input_g(s, shape);
  const Mat F = regressor_F(s, shape);
  const Vec LF = F.transpose() * eval.dh_dx;  // (dh/dx F)^T
  const double Lf = eval.dh_dx.dot(drift_f(s));

  Constraint c;
  c.a = g.transpose() * eval.dh_dx;
  double level, shift, adapt;
  if (cfg.mode == FilterMode::TVCBF) {
    level = eval.h_r;
    c.robust_h = eval.h_r;
    shift = -cfg.C;
    adapt = LF.dot(est.theta_hat);
  } else {
    c.tightening = tightening(est);
    c.gamma = issf_margin(cfg.delta, cfg.alpha0, cfg.issf_epsilon);
    c.eta = c.a.norm() * cfg.delta;
    level = eval.h_r - c.tightening + c.gamma;
    c.robust_h = level;
    shift = c.eta;
    if (theta_rate)
      adapt = LF.dot(est.theta_hat) + eval.dh_dtheta.dot(*theta_rate);
    else
      adapt = LF.dot(lambda_eff(est, eval));
  }
  double b = -cfg.alpha0 * level;
  b += shift;
  b -= eval.dh_dt;
  b -= Lf;
  b -= adapt;
  c.b = b;
  return c;
}

inline FilterResult solve_qp(const Vec& u_nominal, const Vec& a, double b, const std::optional<InputBox>& box = {}) {
  if (a.size() != u_nominal.size()) throw std::invalid_argument("solve_qp: dimension mismatch");
  FilterResult r;
  r.a = a;
  r.b = b;
  if (!box) {
    const double au = a.dot(u_nominal);
    if (au >= b) {
      r.u_safe = u_nominal;
    } else {
      const double aa = a.squaredNorm();
      if (aa == 0.0) {
        r.u_safe = u_nominal;
        r.infeasible = true;
      } else {
        r.u_safe = u_nominal + a * ((b - au) / aa);
        r.active = true;
      }
    }
    r.slack = a.dot(r.u_safe) - b;
    return r;
  }

  const Vec& lo = box->lower;
  const Vec& hi = box->upper;
  if (lo.size() != a.size() || hi.size() != a.size()) throw std::invalid_argument("solve_qp: box dimension mismatch");
  auto at = [&](double mu) { return (u_nominal + mu * a).cwiseMax(lo).cwiseMin(hi).eval(); };
  Vec u0 = at(0.0);
  if (a.dot(u0) >= b) {
    r.u_safe = u0;
    r.slack = a.dot(u0) - b;
    return r;
  }
  // a.u(mu) is nondecreasing and piecewise linear in mu; walk its breakpoints
  std::vector<double> mus;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (double edge : {lo[i], hi[i]}) {
      const double m = (edge - u_nominal[i]) / a[i];
      if (m > 0.0) mus.push_back(m);
    }
  }
  std::sort(mus.begin(), mus.end());
  double mu_prev = 0.0;
  double phi_prev = a.dot(u0);
  for (double m : mus) {
    const double phi = a.dot(at(m));
    if (phi >= b) {
      const double mu = phi > phi_prev ? mu_prev + (m - mu_prev) * (b - phi_prev) / (phi - phi_prev) : m;
      r.u_safe = at(mu);
      r.active = true;
      r.slack = a.dot(r.u_safe) - b;
      return r;
    }
    mu_prev = m;
    phi_prev = phi;
  }
  r.u_safe = u0;
  r.infeasible = true;
  r.slack = a.dot(u0) - b;
  return r;
}

struct FilterStep {
  Vec u_safe;
  std::vector<BarrierEval> evals;
  std::vector<Constraint> constraints;
  std::vector<FilterResult> results;
  bool infeasible = false;
};

// One barrier per axis. Each barrier only involves its own input, so the stacked QP splits per axis.
inline FilterStep filter_step(const SysState& s, const ParamEstimate& est, std::span<const BoundSchedule> schedules,
                              double t, const Vec& u_nominal, const FilterConfig& cfg, const PlantShape& shape,
                              const Vec* theta_rate = nullptr) {
  const Eigen::Index n = s.axes();
  if (static_cast<Eigen::Index>(schedules.size()) != n) throw std::invalid_argument("filter_step: one schedule per axis");
  FilterStep out;
  out.u_safe = u_nominal;
  for (Eigen::Index i = 0; i < n; ++i) {
    BarrierEval e = eval_force_box(s, est, schedules[static_cast<std::size_t>(i)], t, i);
    Constraint c = assemble_constraint(e, est, s, t, cfg, shape, theta_rate);
    std::optional<InputBox> box1;
    if (cfg.input_box)
      box1 = InputBox{Vec::Constant(1, cfg.input_box->lower[i]), Vec::Constant(1, cfg.input_box->upper[i])};
    FilterResult r = solve_qp(Vec::Constant(1, u_nominal[i]), Vec::Constant(1, c.a[i]), c.b, box1);
    out.u_safe[i] = r.u_safe[0];
    out.infeasible = out.infeasible || r.infeasible;
    out.evals.push_back(std::move(e));
    out.constraints.push_back(std::move(c));
    out.results.push_back(std::move(r));
  }
  return out;
}

}  // namespace ratvcbf
