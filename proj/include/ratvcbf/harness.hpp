#pragma once

#include "adaptation.hpp"
#include "config.hpp"
#include "safety_filter.hpp"
#include "scenario.hpp"
#include "smid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace ratvcbf {

struct SimRecord {
  double t, p, p_dot, f_c_true, f_c_est, f_lower, f_upper, h_r, robust_h, h_true;
  double u_nominal, u_safe, d;
  double theta_hat_k, theta_hat_b, vartheta_k, vartheta_b;
  double box_lower_k, box_lower_b, box_upper_k, box_upper_b;
  double infeasible_flag, active, edge, area, mrr_true;
};

inline constexpr std::array<const char*, 26> kLogFields{
    "t",           "p",           "p_dot",       "f_c_true",    "f_c_est",         "f_lower", "f_upper",
    "h_r",         "robust_h",    "h_true",      "u_nominal",   "u_safe",          "d",       "theta_hat_k",
    "theta_hat_b", "vartheta_k",  "vartheta_b",  "box_lower_k", "box_lower_b",     "box_upper_k",
    "box_upper_b", "infeasible_flag", "active",  "edge",        "area",            "mrr_true"};

inline std::array<double, 26> fields(const SimRecord& r) {
  return {r.t,           r.p,           r.p_dot,       r.f_c_true,    r.f_c_est,   r.f_lower,   r.f_upper,
          r.h_r,         r.robust_h,    r.h_true,      r.u_nominal,   r.u_safe,    r.d,         r.theta_hat_k,
          r.theta_hat_b, r.vartheta_k,  r.vartheta_b,  r.box_lower_k, r.box_lower_b, r.box_upper_k,
          r.box_upper_b, r.infeasible_flag, r.active,  r.edge,        r.area,      r.mrr_true};
}

struct SimLog {
  FilterMode mode = FilterMode::TVCBF;
  std::vector<SimRecord> records;
};

struct RunSummary {
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t ticks = 0;
  bool activated = false;
  double activation_time = std::numeric_limits<double>::quiet_NaN();
  // everything below is over ticks from activation on
  double min_h_r = std::numeric_limits<double>::quiet_NaN();
  double min_robust_h = std::numeric_limits<double>::quiet_NaN();
  double min_h_true = std::numeric_limits<double>::quiet_NaN();
  double min_h_r_edge = std::numeric_limits<double>::quiet_NaN();
  double min_h_true_edge = std::numeric_limits<double>::quiet_NaN();
  std::size_t violation_ticks = 0;
  std::size_t violation_ticks_true = 0;
  std::size_t edge_violation_ticks = 0;
  std::size_t edge_violation_ticks_true = 0;
  double mean_h = std::numeric_limits<double>::quiet_NaN();
  double mrr_in_band_fraction = std::numeric_limits<double>::quiet_NaN();
  std::size_t infeasible_ticks = 0;
  // estimator and identification bookkeeping (test harness knows theta*)
  std::size_t smid_updates = 0;
  std::size_t smid_inconsistency_count = 0;
  std::size_t smid_unsound_updates = 0;
  std::size_t smid_nesting_violations = 0;
  std::size_t vartheta_increase_events = 0;
  std::size_t containment_violations = 0;
  bool gamma_condition_ok = true;
  bool pass = false;
};

struct RunResult {
  SimLog log;
  RunSummary summary;
  std::vector<ParamBox> box_history;
};

struct RunOptions {
  bool keep_log = true;
};

inline double robust_tolerance() { return 1e-6; }

inline RunResult run(const SimConfig& cfg_in, FilterMode mode, std::uint64_t seed, RunOptions opts = {}) {
  validate(cfg_in);
  SimConfig cfg = cfg_in;
  cfg.filter.mode = mode;
  cfg.disturbance.seed = seed;

  const double duration = cfg.run_duration();
  const auto N = static_cast<std::size_t>(std::llround(duration / cfg.dt));
  const ScenarioProfile prof = build_bound_schedule(cfg.scenario, duration);
  const BoundSchedule& bounds = prof.bounds;
  const TruePlant plant = cfg.plant();
  const PlantShape shape{cfg.m_o};
  const Vec theta_star = cfg.theta_true();
  const bool adaptive = is_adaptive(mode);
  const bool smid_on = mode == FilterMode::RaTVCBF_SMID;
  const auto& sc = cfg.scenario;

  ParamBox box = cfg.prior;
  ParamEstimate est{cfg.theta_hat0, cfg.Gamma, adaptive ? cfg.initial_vartheta() : Vec::Zero(2)};

  RunResult res;
  res.log.mode = mode;
  auto& S = res.summary;
  S.mode = mode_name(mode);
  S.seed = seed;
  res.box_history.push_back(box);

  // Gamma sanity at t = 0, taken at the corridor apex since the start state is out of contact
  if (adaptive) {
    const auto b0 = bounds.at(0.0);
    const double apex = 0.25 * (b0.upper - b0.lower) * (b0.upper - b0.lower);
    S.gamma_condition_ok = gamma_condition_check(est, apex);
    if (!S.gamma_condition_ok)
      throw std::invalid_argument("adaptation.gamma violates lambda_min(Gamma) >= |vartheta|^2/(2h) at t=0");
  }

  SysState x(Vec::Constant(1, cfg.p0), Vec::Constant(1, cfg.p_dot0), 0.0);
  SysState x_prev = x;
  bool activated = false;
  std::vector<RegressionDatum> batch;
  double sum_h = 0.0;
  std::size_t active_ticks = 0, in_band = 0;
  const double mrr_lo = (1.0 - sc.mrr_band_frac) * sc.mrr_desired;
  const double mrr_hi = (1.0 + sc.mrr_band_frac) * sc.mrr_desired;
  const std::array<BoundSchedule, 1> schedules{bounds};
  Vec pending_u, pending_d;

  auto nanmin = [](double a, double b) { return std::isnan(a) ? b : std::min(a, b); };

  if (opts.keep_log) res.log.records.reserve(N + 1);
  for (std::size_t k = 0; k <= N; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    x.t = t;
    if (smid_on) est.vartheta = vartheta_from_box(box, est.theta_hat);
    if (adaptive && ((est.theta_hat - theta_star).cwiseAbs().array() > est.vartheta.array() + 1e-9).any())
      ++S.containment_violations;

    const BarrierEval ev = eval_force_box(x, est, bounds, t);
    const double f_true = plant.k_true[0] * x.p[0] + plant.b_true[0] * x.p_dot[0];
    const double h_true = force_box_value(f_true, ev.f_lower, ev.f_upper);
    const double f_ref = prof.reference_at(t);
    const Vec u_nom = Vec::Constant(1, nominal_p_controller(f_ref, f_true, sc.nominal_gain));

    if (!activated && f_true >= ev.f_lower && f_true <= ev.f_upper) {
      activated = true;
      S.activated = true;
      S.activation_time = t;
    }

    ParamEstimate next = est;
    Vec rate = Vec::Zero(2);
    const bool adapting = adaptive && (activated || cfg.adapt_from_start);
    if (adapting) {
      next = step_estimator(est, tau(ev, x, shape), cfg.dt, box);
      rate = estimator_rate(est, next, cfg.dt);
    }

    Vec u_safe = u_nom;
    double robust_h;
    bool infeasible = false;
    if (activated) {
      const FilterStep fs = filter_step(x, est, schedules, t, u_nom, cfg.filter, shape, adaptive ? &rate : nullptr);
      u_safe = fs.u_safe;
      robust_h = fs.constraints[0].robust_h;
      infeasible = fs.infeasible;
    } else {
      robust_h = adaptive ? ev.h_r - tightening(est) + issf_margin(cfg.filter.delta, cfg.filter.alpha0,
                                                                   cfg.filter.issf_epsilon)
                          : ev.h_r;
    }
    const Vec d = disturbance_sample(cfg.disturbance, t);
    const double area = prof.area_at(t);
    const double mrr = preston_mrr(sc.k_p, f_true, area, sc.tool_speed);
    const bool edge = k < N && prof.area_at(t) != prof.area_at(std::min(duration, t + cfg.dt));

    if (activated) {
      ++active_ticks;
      sum_h += ev.h_r;
      S.min_h_r = nanmin(S.min_h_r, ev.h_r);
      S.min_robust_h = nanmin(S.min_robust_h, robust_h);
      S.min_h_true = nanmin(S.min_h_true, h_true);
      if (ev.h_r < 0.0) ++S.violation_ticks;
      if (h_true < 0.0) ++S.violation_ticks_true;
      if (edge) {
        S.min_h_r_edge = nanmin(S.min_h_r_edge, ev.h_r);
        S.min_h_true_edge = nanmin(S.min_h_true_edge, h_true);
        if (ev.h_r < 0.0) ++S.edge_violation_ticks;
        if (h_true < 0.0) ++S.edge_violation_ticks_true;
      }
      if (mrr >= mrr_lo && mrr <= mrr_hi) ++in_band;
      if (infeasible) ++S.infeasible_ticks;
    }

    if (opts.keep_log) {
      res.log.records.push_back({t, x.p[0], x.p_dot[0], f_true, ev.f_est, ev.f_lower, ev.f_upper, ev.h_r, robust_h,
                                 h_true, u_nom[0], u_safe[0], d[0], est.theta_hat[0], est.theta_hat[1],
                                 est.vartheta[0], est.vartheta[1], box.lower[0], box.lower[1], box.upper[0],
                                 box.upper[1], infeasible ? 1.0 : 0.0, activated ? 1.0 : 0.0, edge ? 1.0 : 0.0,
                                 area, mrr});
    }
    if (k == N) break;

    const SysState x_next = step_rk4(x, plant, u_safe, d, cfg.dt);

    if (smid_on && adapting) {
      if (cfg.smid_derivative == DerivativeSource::truth) {
        batch.push_back(make_datum(x, dynamics(x, plant, u_safe, d), u_safe, shape));
      } else if (k > 0) {
        // central difference around the previous tick, with the input applied there
        StateDeriv xd{(x_next.p - x_prev.p) / (2.0 * cfg.dt), (x_next.p_dot - x_prev.p_dot) / (2.0 * cfg.dt)};
        batch.push_back(make_datum(x, xd, u_safe, shape));
      }
      if (batch.size() == cfg.smid_batch) {
        const SmidUpdate up = update(box, batch, cfg.smid_precision);
        ++S.smid_updates;
        if (!up.consistent) ++S.smid_inconsistency_count;
        if (!up.box.within(box)) ++S.smid_nesting_violations;
        double worst = 0.0;
        for (const auto& r : batch) worst = std::max(worst, (r.Y - r.D * theta_star).cwiseAbs().maxCoeff());
        if (worst <= cfg.smid_precision && !up.box.contains(theta_star)) ++S.smid_unsound_updates;
        const Vec before = vartheta_from_box(box, est.theta_hat);
        const Vec after = vartheta_from_box(up.box, up.box.clamp(est.theta_hat));
        if (up.box.contains(est.theta_hat) && (after.array() > before.array()).any()) ++S.vartheta_increase_events;
        box = up.box;
        res.box_history.push_back(box);
        batch.clear();
      }
    }

    x_prev = x;
    x = x_next;
    est = next;
    if (smid_on) est.theta_hat = box.clamp(est.theta_hat);
  }

  S.ticks = N + 1;
  if (active_ticks) {
    S.mean_h = sum_h / static_cast<double>(active_ticks);
    S.mrr_in_band_fraction = static_cast<double>(in_band) / static_cast<double>(active_ticks);
  }
  const bool sound = S.containment_violations == 0 && S.smid_unsound_updates == 0 && S.smid_nesting_violations == 0;
  if (adaptive)
    S.pass = S.activated && sound && S.min_robust_h >= -robust_tolerance();
  else
    S.pass = S.activated && S.min_h_r >= -robust_tolerance();
  return res;
}

struct Comparison {
  std::array<RunResult, 3> runs;
  double conservatism_reduction_percent = std::numeric_limits<double>::quiet_NaN();
  bool baseline_violates = false;
  bool robust_modes_safe = false;
  bool reduction_in_range = false;
  bool pass = false;
};

inline double conservatism_reduction(double mean_h_ra, double mean_h_smid) {
  return (mean_h_ra - mean_h_smid) / mean_h_ra * 100.0;
}

inline Comparison compare(const SimConfig& cfg, RunOptions opts = {}) {
  Comparison c;
  const std::array<FilterMode, 3> modes{FilterMode::TVCBF, FilterMode::RaTVCBF, FilterMode::RaTVCBF_SMID};
  for (std::size_t i = 0; i < modes.size(); ++i) c.runs[i] = run(cfg, modes[i], cfg.seed, opts);
  const auto& tv = c.runs[0].summary;
  const auto& ra = c.runs[1].summary;
  const auto& sm = c.runs[2].summary;
  c.conservatism_reduction_percent = conservatism_reduction(ra.mean_h, sm.mean_h);
  c.baseline_violates = tv.edge_violation_ticks > 0 || tv.edge_violation_ticks_true > 0;
  c.robust_modes_safe = ra.pass && sm.pass;
  c.reduction_in_range = c.conservatism_reduction_percent >= 30.0 && c.conservatism_reduction_percent <= 60.0;
  c.pass = c.baseline_violates && c.robust_modes_safe && c.reduction_in_range;
  return c;
}

}  // namespace ratvcbf
