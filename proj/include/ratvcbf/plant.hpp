#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ratvcbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// x = [p, p_dot] per contact axis. p > 0 means the tool is pressed into the surface.
struct SysState {
  Vec p;
  Vec p_dot;
  double t = 0.0;

  SysState() = default;
  SysState(Vec p_, Vec p_dot_, double t_ = 0.0) : p(std::move(p_)), p_dot(std::move(p_dot_)), t(t_) {}

  static SysState scalar(double p, double p_dot, double t = 0.0) {
    return SysState(Vec::Constant(1, p), Vec::Constant(1, p_dot), t);
  }

  Eigen::Index axes() const { return p.size(); }

  Vec stacked() const {
    Vec x(2 * axes());
    x << p, p_dot;
    return x;
  }
};

struct StateDeriv {
  Vec p_dot;
  Vec p_ddot;

  Vec stacked() const {
    Vec x(p_dot.size() + p_ddot.size());
    x << p_dot, p_ddot;
    return x;
  }
};

struct TruePlant {
  Vec k_true;
  Vec b_true;
  double m_o = 1.0;

  Vec theta() const {
    Vec th(k_true.size() + b_true.size());
    th << k_true, b_true;
    return th;
  }
};

enum class DisturbanceKind { zero, sinusoid, sinusoid_plus_uniform };

struct DisturbanceSpec {
  double delta = 0.0;
  DisturbanceKind kind = DisturbanceKind::zero;
  double frequency = 1.0;
  std::uint64_t seed = 0;
  Eigen::Index axes = 1;
  // the uniform part is redrawn every hold_period seconds
  double hold_period = 1e-3;
};

namespace detail {

inline void check_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

inline void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

// splitmix64 finalizer, used as a counter-based generator so d(t) is a pure function of t
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double unit_from_bits(std::uint64_t z) { return static_cast<double>(z >> 11) * 0x1.0p-53; }

}  // namespace detail

inline void validate(const SysState& s) {
  if (s.p.size() != s.p_dot.size()) throw std::invalid_argument("SysState: p and p_dot sizes differ");
  detail::check_finite(s.p, "SysState.p");
  detail::check_finite(s.p_dot, "SysState.p_dot");
  detail::check_finite(s.t, "SysState.t");
}

inline void validate(const TruePlant& pl) {
  if (pl.k_true.size() != pl.b_true.size()) throw std::invalid_argument("TruePlant: k and b sizes differ");
  if (!(pl.m_o > 0.0)) throw std::invalid_argument("TruePlant: m_o must be positive");
  if ((pl.k_true.array() < 0.0).any() || (pl.b_true.array() < 0.0).any())
    throw std::invalid_argument("TruePlant: negative stiffness or damping");
}

// f_c = k p + b p_dot, positive into the surface
inline Vec contact_force(const SysState& s, const Vec& k, const Vec& b) {
  validate(s);
  detail::check_finite(k, "contact_force.k");
  detail::check_finite(b, "contact_force.b");
  if (k.size() != s.axes() || b.size() != s.axes()) throw std::invalid_argument("contact_force: dimension mismatch");
  if ((k.array() < 0.0).any() || (b.array() < 0.0).any())
    throw std::invalid_argument("contact_force: negative stiffness or damping");
  return (k.array() * s.p.array() + b.array() * s.p_dot.array()).matrix();
}

inline StateDeriv dynamics(const SysState& s, const TruePlant& pl, const Vec& u, const Vec& d) {
  validate(pl);
  if (u.size() != s.axes() || d.size() != s.axes() || pl.k_true.size() != s.axes())
    throw std::invalid_argument("dynamics: dimension mismatch");
  const Vec fc = contact_force(s, pl.k_true, pl.b_true);
  return {s.p_dot, (-fc + u + d) / pl.m_o};
}

inline SysState step_rk4(const SysState& s, const TruePlant& pl, const Vec& u, const Vec& d, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_rk4: dt must be positive");
  auto shifted = [&](const StateDeriv& k, double h) {
    return SysState(s.p + h * k.p_dot, s.p_dot + h * k.p_ddot, s.t + h);
  };
  const StateDeriv k1 = dynamics(s, pl, u, d);
  const StateDeriv k2 = dynamics(shifted(k1, 0.5 * dt), pl, u, d);
  const StateDeriv k3 = dynamics(shifted(k2, 0.5 * dt), pl, u, d);
  const StateDeriv k4 = dynamics(shifted(k3, dt), pl, u, d);
  SysState out;
  out.p = s.p + dt / 6.0 * (k1.p_dot + 2.0 * k2.p_dot + 2.0 * k3.p_dot + k4.p_dot);
  out.p_dot = s.p_dot + dt / 6.0 * (k1.p_ddot + 2.0 * k2.p_ddot + 2.0 * k3.p_ddot + k4.p_ddot);
  out.t = s.t + dt;
  return out;
}

inline Vec disturbance_sample(const DisturbanceSpec& spec, double t) {
  Vec d = Vec::Zero(spec.axes);
  if (spec.kind == DisturbanceKind::zero || spec.delta == 0.0) return d;
  const double two_pi = 2.0 * std::numbers::pi;
  for (Eigen::Index i = 0; i < spec.axes; ++i) {
    if (spec.kind == DisturbanceKind::sinusoid) {
      d[i] = spec.delta * std::sin(two_pi * spec.frequency * t);
      continue;
    }
    // seeded phase per axis plus a held uniform sample, half the budget each
    const std::uint64_t axis_key = detail::mix64(spec.seed ^ (0x5851f42d4c957f2dULL * (i + 1)));
    const double phase = two_pi * detail::unit_from_bits(axis_key);
    const auto slot = static_cast<std::int64_t>(std::floor(t / spec.hold_period));
    const double uni = 2.0 * detail::unit_from_bits(detail::mix64(axis_key + static_cast<std::uint64_t>(slot))) - 1.0;
    d[i] = 0.5 * spec.delta * std::sin(two_pi * spec.frequency * t + phase) + 0.5 * spec.delta * uni;
  }
  return d.cwiseMax(-spec.delta).cwiseMin(spec.delta);
}

// Parametric shape of the contact model, x_dot = f(x) + F(x) theta + g(x) (u + d) with theta = [k; b].
struct PlantShape {
  double m_o = 1.0;
};

inline Vec drift_f(const SysState& s) {
  Vec f = Vec::Zero(2 * s.axes());
  f.head(s.axes()) = s.p_dot;
  return f;
}

inline Mat regressor_F(const SysState& s, const PlantShape& shape) {
  const Eigen::Index n = s.axes();
  Mat F = Mat::Zero(2 * n, 2 * n);
  F.block(n, 0, n, n) = -s.p.asDiagonal().toDenseMatrix() / shape.m_o;
  F.block(n, n, n, n) = -s.p_dot.asDiagonal().toDenseMatrix() / shape.m_o;
  return F;
}

inline Mat input_g(const SysState& s, const PlantShape& shape) {
  const Eigen::Index n = s.axes();
  Mat g = Mat::Zero(2 * n, n);
  g.bottomRows(n) = Mat::Identity(n, n) / shape.m_o;
  return g;
}

}  // namespace ratvcbf
