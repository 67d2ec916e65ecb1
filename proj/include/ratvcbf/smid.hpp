#pragma once

#include "plant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ratvcbf {

struct ParamBox {
  Vec lower;
  Vec upper;

  Eigen::Index dim() const { return lower.size(); }
  bool contains(const Vec& th, double tol = 0.0) const {
    return ((th.array() >= lower.array() - tol) && (th.array() <= upper.array() + tol)).all();
  }
  bool within(const ParamBox& outer) const {
    return (lower.array() >= outer.lower.array()).all() && (upper.array() <= outer.upper.array()).all();
  }
  Vec clamp(const Vec& th) const { return th.cwiseMax(lower).cwiseMin(upper); }
  Vec center() const { return 0.5 * (lower + upper); }
};

struct RegressionDatum {
  Vec Y;
  Mat D;
  double t = 0.0;
};

struct SmidUpdate {
  ParamBox box;
  bool consistent = true;
};

// Y = x_dot - f(x) - g(x) u, D = F(x); on noiseless data Y = D theta* + g d.
inline RegressionDatum make_datum(const SysState& s, const StateDeriv& xdot, const Vec& u, const PlantShape& shape) {
  RegressionDatum r;
  r.Y = xdot.stacked() - drift_f(s) - input_g(s, shape) * u;
  r.D = regressor_F(s, shape);
  r.t = s.t;
  return r;
}

namespace detail {

struct Halfspace {
  Vec a;
  double c;  // a . theta <= c
};

inline double slack_tol(const Halfspace& h, double scale) { return 1e-12 * (std::abs(h.c) + h.a.norm() * scale) + 1e-15; }

using Polygon = std::vector<Eigen::Vector2d>;

inline Polygon clip(const Polygon& poly, const Halfspace& h, double scale) {
  Polygon out;
  if (poly.empty()) return out;
  const Eigen::Vector2d a(h.a[0], h.a[1]);
  const double tol = slack_tol(h, scale);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Eigen::Vector2d& cur = poly[i];
    const Eigen::Vector2d& nxt = poly[(i + 1) % poly.size()];
    const double sc = a.dot(cur) - h.c;
    const double sn = a.dot(nxt) - h.c;
    const bool in_c = sc <= tol;
    const bool in_n = sn <= tol;
    if (in_c) out.push_back(cur);
    if (in_c != in_n) {
      const double w = sc / (sc - sn);
      out.push_back(cur + w * (nxt - cur));
    }
  }
  return out;
}

inline std::vector<Halfspace> batch_halfspaces(const std::vector<RegressionDatum>& batch, double eps) {
  std::vector<Halfspace> hs;
  for (const auto& r : batch) {
    for (Eigen::Index i = 0; i < r.Y.size(); ++i) {
      const Vec row = r.D.row(i).transpose();
      hs.push_back({row, r.Y[i] + eps});
      hs.push_back({-row, eps - r.Y[i]});
    }
  }
  return hs;
}

// k = 2: clip the box polygon by every halfspace, extremes are vertex extremes.
inline bool extremes_2d(const ParamBox& box, const std::vector<Halfspace>& hs, Vec& lo, Vec& hi) {
  const double scale = std::max(box.lower.cwiseAbs().maxCoeff(), box.upper.cwiseAbs().maxCoeff());
  Polygon poly{{box.lower[0], box.lower[1]}, {box.upper[0], box.lower[1]}, {box.upper[0], box.upper[1]},
               {box.lower[0], box.upper[1]}};
  for (const auto& h : hs) {
    if (h.a.cwiseAbs().maxCoeff() == 0.0) {
      if (h.c < -slack_tol(h, scale)) return false;
      continue;
    }
    poly = clip(poly, h, scale);
    if (poly.empty()) return false;
  }
  lo = Vec::Constant(2, std::numeric_limits<double>::infinity());
  hi = -lo;
  for (const auto& v : poly) {
    lo = lo.cwiseMin(Vec(v));
    hi = hi.cwiseMax(Vec(v));
  }
  return true;
}

// general small k: enumerate basic solutions of k active constraints
inline bool extremes_enum(const ParamBox& box, std::vector<Halfspace> hs, Vec& lo, Vec& hi) {
  const Eigen::Index k = box.dim();
  const double scale = std::max(box.lower.cwiseAbs().maxCoeff(), box.upper.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < k; ++i) {
    Vec e = Vec::Zero(k);
    e[i] = 1.0;
    hs.push_back({e, box.upper[i]});
    hs.push_back({-e, -box.lower[i]});
  }
  auto feasible = [&](const Vec& th) {
    for (const auto& h : hs)
      if (h.a.dot(th) - h.c > slack_tol(h, scale)) return false;
    return true;
  };
  lo = Vec::Constant(k, std::numeric_limits<double>::infinity());
  hi = -lo;
  bool any = false;
  std::vector<std::size_t> idx(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const std::size_t m = hs.size();
  if (m < idx.size()) return false;
  while (true) {
    Mat A(k, k);
    Vec c(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      A.row(r) = hs[idx[static_cast<std::size_t>(r)]].a.transpose();
      c[r] = hs[idx[static_cast<std::size_t>(r)]].c;
    }
    Eigen::FullPivLU<Mat> lu(A);
    if (lu.isInvertible()) {
      const Vec th = lu.solve(c);
      if (th.allFinite() && feasible(th)) {
        lo = lo.cwiseMin(th);
        hi = hi.cwiseMax(th);
        any = true;
      }
    }
    // next combination
    std::size_t pos = idx.size();
    while (pos > 0 && idx[pos - 1] == m - idx.size() + pos - 1) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (std::size_t j = pos; j < idx.size(); ++j) idx[j] = idx[j - 1] + 1;
  }
  return any;
}

}  // namespace detail

inline SmidUpdate update(const ParamBox& box, const std::vector<RegressionDatum>& batch, double precision) {
  if (!(precision > 0.0)) throw std::invalid_argument("smid update: precision must be positive");
  if (box.lower.size() != box.upper.size() || (box.lower.array() > box.upper.array()).any())
    throw std::invalid_argument("smid update: malformed box");
  if (batch.empty()) return {box, true};
  for (const auto& r : batch) {
    if (r.D.cols() != box.dim() || r.D.rows() != r.Y.size())
      throw std::invalid_argument("smid update: datum dimension mismatch");
    if (!r.Y.allFinite() || !r.D.allFinite()) throw std::invalid_argument("smid update: non-finite datum");
  }
  const auto hs = detail::batch_halfspaces(batch, precision);
  Vec lo, hi;
  const bool ok = box.dim() == 2 ? detail::extremes_2d(box, hs, lo, hi) : detail::extremes_enum(box, hs, lo, hi);
  if (!ok) return {box, false};
  // clip roundoff so the result is nested in the prior box
  ParamBox out{lo.cwiseMax(box.lower).cwiseMin(box.upper), hi.cwiseMax(box.lower).cwiseMin(box.upper)};
  out.upper = out.upper.cwiseMax(out.lower);
  return {out, true};
}

inline Vec vartheta_from_box(const ParamBox& box, const Vec& theta_hat) {
  const double tol = 1e-12 * std::max(1.0, theta_hat.cwiseAbs().maxCoeff());
  if (theta_hat.size() != box.dim() || !box.contains(theta_hat, tol))
    throw std::invalid_argument("vartheta_from_box: theta_hat outside the box");
  return (theta_hat - box.lower).cwiseMax(box.upper - theta_hat).cwiseMax(0.0);
}

}  // namespace ratvcbf
