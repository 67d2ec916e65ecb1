#pragma once

#include "barrier.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace ratvcbf {

using Point2 = std::array<double, 2>;

struct Plate {
  double width = 0.3;
  double height = 0.2;
};

enum class CorridorSource { mrr_band, force_band };
enum class ReferenceKind { outside, center };

struct ScenarioConfig {
  Plate plate;
  double tool_radius = 0.025;
  double tool_speed = 0.05;
  std::vector<Point2> path{{0.05, 0.05}, {0.30, 0.05}, {0.30, 0.15}, {0.05, 0.15}};
  double k_p = 1.0;
  double mrr_desired = 500.0;
  double mrr_band_frac = 0.10;
  double force_band_frac = 0.15;
  CorridorSource corridor = CorridorSource::mrr_band;
  ReferenceKind reference = ReferenceKind::outside;
  double reference_offset = 1.05;
  // reference ramps linearly from zero over this many seconds (0 = step)
  double reference_ramp = 0.5;
  double sample_period = 0.01;
  double nominal_gain = 2.0;
};

inline void validate(const ScenarioConfig& c) {
  if (!(c.tool_radius > 0.0)) throw std::invalid_argument("scenario: tool_radius must be positive");
  if (!(c.tool_speed >= 0.0)) throw std::invalid_argument("scenario: tool_speed must be nonnegative");
  if (!(c.mrr_band_frac > 0.0 && c.mrr_band_frac < 1.0)) throw std::invalid_argument("scenario: mrr_band_frac in (0,1)");
  if (!(c.force_band_frac > 0.0 && c.force_band_frac < 1.0))
    throw std::invalid_argument("scenario: force_band_frac in (0,1)");
  if (!(c.plate.width > 0.0 && c.plate.height > 0.0)) throw std::invalid_argument("scenario: plate must have positive size");
  if (c.path.size() < 2) throw std::invalid_argument("scenario: path needs at least two corners");
  if (!(c.sample_period > 0.0)) throw std::invalid_argument("scenario: sample_period must be positive");
  if (!(c.nominal_gain > 0.0)) throw std::invalid_argument("scenario: nominal_gain must be positive");
  if (c.reference_ramp < 0.0) throw std::invalid_argument("scenario: reference_ramp must be nonnegative");
}

namespace detail {

// area of the origin-centred disc inside {x <= X, y <= Y}
inline double disc_quadrant(double X, double Y, double r) {
  if (Y <= -r || X <= -r) return 0.0;
  const double r2 = r * r;
  auto G = [&](double x) {
    x = std::clamp(x, -r, r);
    return 0.5 * (x * std::sqrt(std::max(0.0, r2 - x * x)) + r2 * std::asin(x / r));
  };
  const double xc = std::min(X, r);
  auto S = [&](double a, double b) {  // integral of sqrt(r^2-x^2) over [a,b] cut at xc
    b = std::min(b, xc);
    return b > a ? G(b) - G(a) : 0.0;
  };
  auto len = [&](double a, double b) {
    b = std::min(b, xc);
    return b > a ? b - a : 0.0;
  };
  if (Y >= r) return 2.0 * S(-r, r);
  const double xy = std::sqrt(r2 - Y * Y);
  if (Y >= 0.0) return 2.0 * S(-r, -xy) + Y * len(-xy, xy) + S(-xy, xy) + 2.0 * S(xy, r);
  return Y * len(-xy, xy) + S(-xy, xy);
}

}  // namespace detail

inline double contact_area(const Point2& center, const Plate& plate, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("contact_area: radius must be positive");
  const double x0 = 0.0 - center[0], x1 = plate.width - center[0];
  const double y0 = 0.0 - center[1], y1 = plate.height - center[1];
  using detail::disc_quadrant;
  const double a = disc_quadrant(x1, y1, r) - disc_quadrant(x0, y1, r) - disc_quadrant(x1, y0, r) +
                   disc_quadrant(x0, y0, r);
  return std::clamp(a, 0.0, std::numbers::pi * r * r);
}

inline double preston_mrr(double k_p, double force, double area, double w) {
  if (!(area > 0.0)) throw std::invalid_argument("preston_mrr: area must be positive");
  return k_p * force * w / area;
}

inline double force_from_mrr(double mrr_target, double k_p, double area, double w) {
  if (k_p * w == 0.0) throw std::invalid_argument("force_from_mrr: k_p and w must be nonzero");
  return mrr_target * area / (k_p * w);
}

inline double nominal_p_controller(double f_ref, double f_meas, double gain) {
  if (!(gain > 0.0)) throw std::invalid_argument("nominal_p_controller: gain must be positive");
  return gain * (f_ref - f_meas) + f_ref;
}

inline double path_perimeter(const std::vector<Point2>& path) {
  double len = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto& a = path[i];
    const auto& b = path[(i + 1) % path.size()];
    len += std::hypot(b[0] - a[0], b[1] - a[1]);
  }
  return len;
}

// constant-speed traversal of the closed loop
inline Point2 tool_center(const ScenarioConfig& c, double t) {
  const double per = path_perimeter(c.path);
  if (per == 0.0) return c.path.front();
  double s = std::fmod(c.tool_speed * t, per);
  for (std::size_t i = 0; i < c.path.size(); ++i) {
    const auto& a = c.path[i];
    const auto& b = c.path[(i + 1) % c.path.size()];
    const double seg = std::hypot(b[0] - a[0], b[1] - a[1]);
    if (s <= seg || i + 1 == c.path.size()) {
      const double w = seg > 0.0 ? std::min(1.0, s / seg) : 0.0;
      return {a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])};
    }
    s -= seg;
  }
  return c.path.front();
}

inline double default_duration(const ScenarioConfig& c) {
  if (c.tool_speed == 0.0) throw std::invalid_argument("default_duration: stationary tool");
  return path_perimeter(c.path) / c.tool_speed;
}

// Sampled corridor, contact area and reference on a common piecewise-linear grid.
struct ScenarioProfile {
  BoundSchedule bounds;
  std::vector<double> times, area, reference;
  double ramp = 0.0;

  double interp(const std::vector<double>& v, double t) const {
    if (times.size() == 1) return v[0];
    const double tol = 1e-9 * std::max(1.0, std::abs(t));
    auto it = std::upper_bound(times.begin(), times.end(), t + tol);
    std::size_t i = static_cast<std::size_t>(std::distance(times.begin(), it));
    i = std::clamp<std::size_t>(i == 0 ? 0 : i - 1, 0, times.size() - 2);
    const double w = (t - times[i]) / (times[i + 1] - times[i]);
    return v[i] + w * (v[i + 1] - v[i]);
  }
  double area_at(double t) const { return interp(area, t); }
  double reference_at(double t) const {
    const double scale = ramp > 0.0 ? std::min(1.0, t / ramp) : 1.0;
    return scale * interp(reference, t);
  }
};

inline ScenarioProfile build_bound_schedule(const ScenarioConfig& c, double duration) {
  validate(c);
  if (duration < 0.0) throw std::invalid_argument("build_bound_schedule: negative duration");
  const auto n = static_cast<std::size_t>(std::ceil(duration / c.sample_period - 1e-9));
  ScenarioProfile prof;
  prof.ramp = c.reference_ramp;
  std::vector<double> lower, upper;
  for (std::size_t j = 0; j <= std::max<std::size_t>(n, 1); ++j) {
    const double t = static_cast<double>(j) * c.sample_period;
    const double A = contact_area(tool_center(c, t), c.plate, c.tool_radius);
    double lo, up;
    if (c.corridor == CorridorSource::mrr_band) {
      lo = force_from_mrr((1.0 - c.mrr_band_frac) * c.mrr_desired, c.k_p, A, c.tool_speed);
      up = force_from_mrr((1.0 + c.mrr_band_frac) * c.mrr_desired, c.k_p, A, c.tool_speed);
    } else {
      const double f = force_from_mrr(c.mrr_desired, c.k_p, A, c.tool_speed);
      lo = (1.0 - c.force_band_frac) * f;
      up = (1.0 + c.force_band_frac) * f;
    }
    prof.times.push_back(t);
    prof.area.push_back(A);
    lower.push_back(lo);
    upper.push_back(up);
    prof.reference.push_back(c.reference == ReferenceKind::outside ? c.reference_offset * up : 0.5 * (lo + up));
  }
  prof.bounds = BoundSchedule(prof.times, lower, upper);
  return prof;
}

}  // namespace ratvcbf
