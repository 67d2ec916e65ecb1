#pragma once

// Brute-force reference computations used by `selftest` and the test suite. Nothing here calls the
// code it checks except to obtain the answer under test.

#include "adaptation.hpp"
#include "barrier.hpp"
#include "plant.hpp"
#include "safety_filter.hpp"
#include "smid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

namespace ratvcbf::oracle {

// ---- barrier, evaluated from its definition in extended precision

struct LinearBounds {
  long double lo0, lo_rate, up0, up_rate;
};

inline long double h_def(long double p, long double v, long double k, long double b, long double t,
                         const LinearBounds& B) {
  const long double f = k * p + b * v;
  const long double lo = B.lo0 + B.lo_rate * t;
  const long double up = B.up0 + B.up_rate * t;
  return (f - lo) * (up - f);
}

struct GradientCheck {
  double worst_rel = 0.0;  // over components that are not near zero
  double worst_abs_near_zero = 0.0;
  double worst_value = 0.0;  // |h_lib - h_def|
  int failures = 0;
  int samples = 0;
};

// Random states, estimates and times on a two-segment schedule; central differences with step 1e-6
// scaled by the magnitude of the coordinate, staying clear of the breakpoint.
inline GradientCheck gradient_suite(int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * U(rng); };
  GradientCheck out;
  for (int s = 0; s < samples; ++s) {
    const double lo0 = uni(5.0, 20.0), lo1 = uni(5.0, 20.0);
    const double gap0 = uni(1.0, 8.0), gap1 = uni(1.0, 8.0);
    const double tb = 1.0;
    BoundSchedule sched({0.0, tb, 2.0}, {lo0, lo1, lo0}, {lo0 + gap0, lo1 + gap1, lo0 + gap0});
    double t = uni(0.01, 1.99);
    if (std::abs(t - tb) < 1e-3) t = tb + 2e-3;
    const bool first = t < tb;
    LinearBounds B;
    if (first) {
      B = {lo0, (lo1 - lo0) / tb, lo0 + gap0, (lo1 + gap1 - lo0 - gap0) / tb};
    } else {
      const long double rl = (lo0 - lo1) / (2.0 - tb), ru = (lo0 + gap0 - lo1 - gap1) / (2.0 - tb);
      B = {lo1 - rl * tb, rl, lo1 + gap1 - ru * tb, ru};
    }
    const double k = uni(900.0, 1500.0), b = uni(5.0, 100.0);
    // states spread across and around the corridor
    const double f_target = uni(0.5 * lo0, 1.5 * (lo0 + gap0));
    const double v = uni(-0.1, 0.1);
    const double p = (f_target - b * v) / k;

    const SysState x = SysState::scalar(p, v, t);
    ParamEstimate est{(Vec(2) << k, b).finished(), Mat::Identity(2, 2), Vec::Zero(2)};
    const BarrierEval e = eval_force_box(x, est, sched, t);

    const long double H = h_def(p, v, k, b, t, B);
    out.worst_value = std::max(out.worst_value, static_cast<double>(std::fabs(H - e.h_r)));

    const long double z[5] = {p, v, k, b, t};
    const double analytic[5] = {e.dh_dx[0], e.dh_dx[1], e.dh_dtheta[0], e.dh_dtheta[1], e.dh_dt};
    for (int i = 0; i < 5; ++i) {
      const long double step = 1e-6L * std::max(1.0L, std::fabs(z[i]));
      long double zp[5], zm[5];
      std::copy(z, z + 5, zp);
      std::copy(z, z + 5, zm);
      zp[i] += step;
      zm[i] -= step;
      const long double fd = (h_def(zp[0], zp[1], zp[2], zp[3], zp[4], B) - h_def(zm[0], zm[1], zm[2], zm[3], zm[4], B)) /
                             (2.0L * step);
      const double err = static_cast<double>(std::fabs(fd - analytic[i]));
      const double mag = std::abs(analytic[i]);
      if (err <= 1e-9) {
        if (mag < 1e-3) out.worst_abs_near_zero = std::max(out.worst_abs_near_zero, err);
        else out.worst_rel = std::max(out.worst_rel, err / mag);
        continue;
      }
      const double rel = err / std::max(mag, 1e-300);
      out.worst_rel = std::max(out.worst_rel, rel);
      if (rel >= 1e-6) ++out.failures;
    }
    ++out.samples;
  }
  return out;
}

// ---- QP: KKT residual and grid search

inline double qp_objective(const Vec& u, const Vec& u0) { return 0.5 * (u - u0).squaredNorm(); }

// Largest violation of primal feasibility, stationarity, dual feasibility and complementarity, minimized over
// the candidate multipliers (mu = 0 and every mu that zeroes one free coordinate).
inline double kkt_residual(const Vec& u, const Vec& u0, const Vec& a, double b, const std::optional<InputBox>& box) {
  const Eigen::Index n = u.size();
  double primal = std::max(0.0, b - a.dot(u));
  if (box) primal = std::max({primal, (box->lower - u).maxCoeff(), (u - box->upper).maxCoeff()});
  std::vector<double> mus{0.0};
  for (Eigen::Index i = 0; i < n; ++i)
    if (a[i] != 0.0) mus.push_back(std::max(0.0, (u[i] - u0[i]) / a[i]));
  if (!box && a.squaredNorm() > 0) mus.push_back(std::max(0.0, a.dot(u - u0) / a.squaredNorm()));
  double best = std::numeric_limits<double>::infinity();
  for (double mu : mus) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g = u[i] - u0[i] - mu * a[i];
      const double scale = 1.0 + std::abs(u0[i]) + std::abs(mu * a[i]);
      const bool at_lo = box && std::abs(u[i] - box->lower[i]) <= 1e-12 * (1.0 + std::abs(box->lower[i]));
      const bool at_hi = box && std::abs(u[i] - box->upper[i]) <= 1e-12 * (1.0 + std::abs(box->upper[i]));
      double gi;
      if (at_lo && at_hi) gi = 0.0;
      else if (at_lo) gi = std::max(0.0, -g);
      else if (at_hi) gi = std::max(0.0, g);
      else gi = std::abs(g);
      r = std::max(r, gi / scale);
    }
    r = std::max(r, std::abs(mu * (a.dot(u) - b)) / (1.0 + std::abs(b) + mu * a.norm()));
    best = std::min(best, r);
  }
  return std::max(best, primal);
}

struct GridAnswer {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
};

// Candidates: a regular grid over the box, the box edges, and the constraint line clipped to the box.
inline GridAnswer qp_grid(const Vec& u0, const Vec& a, double b, const InputBox& box, int per_axis) {
  const Eigen::Index n = u0.size();
  GridAnswer g;
  auto consider = [&](const Vec& u) {
    if (a.dot(u) >= b - 1e-12 * (1.0 + std::abs(b))) {
      g.feasible = true;
      g.objective = std::min(g.objective, qp_objective(u, u0));
    }
  };
  const Vec span = box.upper - box.lower;
  if (n == 1) {
    for (int i = 0; i <= per_axis; ++i) consider(box.lower + span * (static_cast<double>(i) / per_axis));
    if (a[0] != 0.0) {
      const Vec u = Vec::Constant(1, b / a[0]);
      if (u[0] >= box.lower[0] && u[0] <= box.upper[0]) consider(u);
    }
    return g;
  }
  if (n != 2) throw std::invalid_argument("qp_grid: 1 or 2 inputs only");
  Vec u(2);
  for (int i = 0; i <= per_axis; ++i)
    for (int j = 0; j <= per_axis; ++j) {
      u << box.lower[0] + span[0] * i / per_axis, box.lower[1] + span[1] * j / per_axis;
      consider(u);
    }
  const int fine = per_axis * 20;
  // the line a.u = b, walked along its longer box extent
  for (int axis = 0; axis < 2; ++axis) {
    const int other = 1 - axis;
    if (a[other] == 0.0) continue;
    for (int i = 0; i <= fine; ++i) {
      u[axis] = box.lower[axis] + span[axis] * i / fine;
      u[other] = (b - a[axis] * u[axis]) / a[other];
      if (u[other] >= box.lower[other] && u[other] <= box.upper[other]) consider(u);
    }
  }
  for (int axis = 0; axis < 2; ++axis)
    for (double edge : {box.lower[1 - axis], box.upper[1 - axis]})
      for (int i = 0; i <= fine; ++i) {
        u[axis] = box.lower[axis] + span[axis] * i / fine;
        u[1 - axis] = edge;
        consider(u);
      }
  return g;
}

// ---- SMID: dense grid over the prior box
//
// For the extremes along coordinate i, walk a grid of `cells` steps in i and, on each grid line, intersect the
// per-datum intervals of the other coordinate. A grid line is feasible iff that intersection is nonempty.

struct GridBox {
  bool feasible = false;
  Vec lower, upper, cell;
};

inline GridBox smid_grid(const ParamBox& box, const std::vector<RegressionDatum>& batch, double eps, int cells) {
  GridBox g;
  g.cell = (box.upper - box.lower) / cells;
  g.lower = Vec::Constant(2, std::numeric_limits<double>::infinity());
  g.upper = -g.lower;
  std::vector<std::pair<Eigen::RowVector2d, double>> rows;
  for (const auto& r : batch)
    for (Eigen::Index i = 0; i < r.Y.size(); ++i) {
      if (r.D.row(i).cwiseAbs().maxCoeff() == 0.0) {
        if (std::abs(r.Y[i]) > eps) return g;
        continue;
      }
      rows.emplace_back(r.D.row(i), r.Y[i]);
    }
  for (int axis = 0; axis < 2; ++axis) {
    const int other = 1 - axis;
    for (int i = 0; i <= cells; ++i) {
      const double x = box.lower[axis] + g.cell[axis] * i;
      double lo = box.lower[other], hi = box.upper[other];
      for (const auto& [D, Y] : rows) {
        const double rest = Y - D[axis] * x;
        if (D[other] == 0.0) {
          if (std::abs(rest) > eps) lo = hi + 1.0;
          continue;
        }
        double e0 = (rest - eps) / D[other], e1 = (rest + eps) / D[other];
        if (e0 > e1) std::swap(e0, e1);
        lo = std::max(lo, e0);
        hi = std::min(hi, e1);
      }
      if (lo > hi) continue;
      g.feasible = true;
      g.lower[axis] = std::min(g.lower[axis], x);
      g.upper[axis] = std::max(g.upper[axis], x);
    }
  }
  return g;
}

// synthetic batch from the contact model with bounded residual noise
inline std::vector<RegressionDatum> synthetic_batch(const Vec& theta_star, double eps, std::size_t count,
                                                    std::mt19937_64& rng, double m_o = 1.0) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<RegressionDatum> out;
  const PlantShape shape{m_o};
  for (std::size_t j = 0; j < count; ++j) {
    const SysState x = SysState::scalar(0.005 + 0.015 * U(rng), -0.06 + 0.12 * U(rng), 0.001 * j);
    const Vec u = Vec::Constant(1, -20.0 + 60.0 * U(rng));
    const Vec d = Vec::Constant(1, m_o * eps * (2.0 * U(rng) - 1.0));
    const TruePlant plant{theta_star.head(1), theta_star.tail(1), m_o};
    out.push_back(make_datum(x, dynamics(x, plant, u, d), u, shape));
  }
  return out;
}

// ---- RK4 order on the linear plant

inline double rk4_order(double dt_coarse = 4e-3, double horizon = 0.2) {
  const TruePlant plant{Vec::Constant(1, 1400.0), Vec::Constant(1, 70.0), 1.0};
  const Vec u = Vec::Constant(1, 12.0), d = Vec::Constant(1, 0.3);
  auto simulate = [&](double dt) {
    SysState x = SysState::scalar(0.002, 0.05);
    const auto n = static_cast<int>(std::llround(horizon / dt));
    for (int i = 0; i < n; ++i) x = step_rk4(x, plant, u, d, dt);
    return x;
  };
  const SysState ref = simulate(1e-6);
  auto err = [&](double dt) {
    const SysState x = simulate(dt);
    return std::hypot(x.p[0] - ref.p[0], (x.p_dot[0] - ref.p_dot[0]) * 1e-2);
  };
  const double e1 = err(dt_coarse), e2 = err(dt_coarse / 2), e3 = err(dt_coarse / 4);
  return 0.5 * (std::log2(e1 / e2) + std::log2(e2 / e3));
}

}  // namespace ratvcbf::oracle

namespace ratvcbf {

// Quick version of the property suite, for `ratvcbf_cli selftest`.
inline bool selftest(std::ostream& os) {
  bool all = true;
  auto line = [&](bool ok, const char* name, const std::string& detail) {
    os << (ok ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
    all = all && ok;
  };
  char buf[256];

  {
    const auto g = oracle::gradient_suite(1000, 7);
    std::snprintf(buf, sizeof buf, "samples=%d worst_rel=%.2e worst_abs_near_zero=%.2e", g.samples, g.worst_rel,
                  g.worst_abs_near_zero);
    line(g.failures == 0, "barrier gradients vs finite differences", buf);
  }
  {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double worst = 0.0;
    int bad = 0;
    for (int s = 0; s < 2000; ++s) {
      const Eigen::Index n = 1 + s % 2;
      const Vec u0 = 10.0 * Vec::NullaryExpr(n, [&] { return U(rng); });
      const Vec a = 3.0 * Vec::NullaryExpr(n, [&] { return U(rng); });
      const double b = 20.0 * U(rng);
      const Vec c = 5.0 * Vec::NullaryExpr(n, [&] { return U(rng); });
      const InputBox box{(c.array() - 6.0).matrix(), (c.array() + 6.0).matrix()};
      const auto r = solve_qp(u0, a, b, box);
      if (r.infeasible) continue;
      const double k = oracle::kkt_residual(r.u_safe, u0, a, b, box);
      worst = std::max(worst, k);
      if (k >= 1e-9) ++bad;
    }
    std::snprintf(buf, sizeof buf, "instances=2000 worst_kkt=%.2e", worst);
    line(bad == 0, "QP KKT residuals", buf);
  }
  {
    std::mt19937_64 rng(5);
    const Vec th = (Vec(2) << 1400.0, 70.0).finished();
    const ParamBox prior{(Vec(2) << 900.0, 0.0).finished(), (Vec(2) << 1500.0, 100.0).finished()};
    int bad = 0;
    for (int s = 0; s < 5; ++s) {
      const auto batch = oracle::synthetic_batch(th, 0.2, 5, rng);
      const auto up = update(prior, batch, 0.2);
      const auto g = oracle::smid_grid(prior, batch, 0.2, 2000);
      if (!up.consistent || !g.feasible || !up.box.contains(th)) ++bad;
      else if (((g.lower - up.box.lower).array() < -1e-9).any() ||
               ((g.lower - up.box.lower).array() > g.cell.array() + 1e-9).any() ||
               ((up.box.upper - g.upper).array() < -1e-9).any() ||
               ((up.box.upper - g.upper).array() > g.cell.array() + 1e-9).any())
        ++bad;
    }
    line(bad == 0, "SMID box vs dense grid", "batches=5 grid lines=2001");
  }
  {
    const double order = oracle::rk4_order();
    std::snprintf(buf, sizeof buf, "observed order=%.3f", order);
    line(order >= 3.9, "RK4 convergence order", buf);
  }
  {
    DisturbanceSpec spec{0.7, DisturbanceKind::sinusoid_plus_uniform, 3.0, 99, 1, 1e-3};
    double m = 0.0;
    for (int i = 0; i < 200000; ++i) m = std::max(m, std::abs(disturbance_sample(spec, i * 1.37e-4)[0]));
    std::snprintf(buf, sizeof buf, "max|d|=%.6f delta=0.7", m);
    line(m <= 0.7, "disturbance bound", buf);
  }
  return all;
}

}  // namespace ratvcbf
