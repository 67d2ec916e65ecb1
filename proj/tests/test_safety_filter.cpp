#include <ratvcbf/selftest.hpp>

#include <gtest/gtest.h>

#include <cstring>
#include <random>

using namespace ratvcbf;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

ParamEstimate est(Vec th, Vec vt, Mat G = v2(2e5, 4e4).asDiagonal()) { return {std::move(th), std::move(G), std::move(vt)}; }

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(SolveQp, Examples) {
  const auto r = solve_qp(v1(0), v1(2), 4.0);
  EXPECT_DOUBLE_EQ(r.u_safe[0], 2.0);
  EXPECT_NEAR(r.slack, 0.0, 1e-15);
  EXPECT_TRUE(r.active);

  const auto in = solve_qp(v1(3), v1(2), 4.0);
  EXPECT_EQ(in.u_safe[0], 3.0);
  EXPECT_FALSE(in.active);

  const auto bad = solve_qp(v1(3), v1(0), 1.0);
  EXPECT_TRUE(bad.infeasible);
  EXPECT_FALSE(solve_qp(v1(3), v1(0), -1.0).infeasible);

  const InputBox box{v1(-1), v1(1)};
  const auto empty = solve_qp(v1(0), v1(1), 2.0, box);
  EXPECT_TRUE(empty.infeasible);
  EXPECT_THROW(solve_qp(v2(0, 0), v1(1), 0.0), std::invalid_argument);
}

TEST(SolveQp, RandomInstancesAgainstKktAndGrid) {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> U(-1, 1);
  int solved = 0, inactive = 0, infeasible = 0;
  double worst_kkt = 0.0;
  for (int s = 0; s < 10000; ++s) {
    const Eigen::Index n = 1 + s % 2;
    const Vec u0 = 10.0 * Vec::NullaryExpr(n, [&] { return U(rng); });
    const Vec a = 3.0 * Vec::NullaryExpr(n, [&] { return U(rng); });
    const double b = 20.0 * U(rng);
    const Vec c = 5.0 * Vec::NullaryExpr(n, [&] { return U(rng); });
    const Vec half = Vec::NullaryExpr(n, [&] { return 1.0 + 7.0 * (0.5 + 0.5 * U(rng)); });
    const InputBox box{c - half, c + half};
    const auto r = solve_qp(u0, a, b, box);

    const int per_axis = n == 1 ? 4000 : 120;
    const auto g = oracle::qp_grid(u0, a, b, box, per_axis);
    if (r.infeasible) {
      ++infeasible;
      EXPECT_FALSE(g.feasible) << "instance " << s;
      continue;
    }
    ASSERT_TRUE(g.feasible) << "instance " << s;
    ++solved;
    const double k = oracle::kkt_residual(r.u_safe, u0, a, b, box);
    worst_kkt = std::max(worst_kkt, k);
    EXPECT_LT(k, 1e-9) << "instance " << s;

    const double obj = oracle::qp_objective(r.u_safe, u0);
    // every optimum location has a candidate within rho: half a cell diagonal of the coarse grid
    const double rho = 0.5 * std::sqrt(static_cast<double>(n)) * (box.upper - box.lower).maxCoeff() / per_axis;
    const double res = (r.u_safe - u0).norm() * rho + 0.5 * rho * rho;
    EXPECT_LE(obj, g.objective + 1e-9) << "instance " << s;
    EXPECT_LE(g.objective - obj, res + 1e-9) << "instance " << s;

    if (a.dot(u0) >= b && ((u0 - box.lower).array() >= 0).all() && ((box.upper - u0).array() >= 0).all()) {
      ++inactive;
      EXPECT_TRUE((r.u_safe.array() == u0.array()).all()) << "instance " << s;
    }
  }
  EXPECT_GT(solved, 6000);
  EXPECT_GT(infeasible, 1000);
  EXPECT_GT(inactive, 100);
  RecordProperty("worst_kkt", std::to_string(worst_kkt));
}

TEST(SolveQp, UnboxedClosedForm) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int s = 0; s < 2000; ++s) {
    const Vec u0 = v2(10 * U(rng), 10 * U(rng)), a = v2(3 * U(rng), 3 * U(rng));
    const double b = 20 * U(rng);
    const auto r = solve_qp(u0, a, b);
    if (a.dot(u0) >= b) {
      EXPECT_TRUE((r.u_safe.array() == u0.array()).all());
    } else {
      EXPECT_NEAR((r.u_safe - (u0 + a * (b - a.dot(u0)) / a.squaredNorm())).norm(), 0.0, 1e-12);
      EXPECT_LT(oracle::kkt_residual(r.u_safe, u0, a, b, std::nullopt), 1e-9);
    }
  }
}

TEST(AssembleConstraint, TvcbfMatchesUnmarginedRobustForm) {
  const auto sched = BoundSchedule({0.0, 1.0}, {8.0, 10.0}, {12.0, 13.0});
  const SysState s = SysState::scalar(0.009, 0.02);
  const PlantShape shape{1.0};
  const auto e = est(v2(1400, 70), Vec::Zero(2));
  const BarrierEval ev = eval_force_box(s, e, sched, 0.3);
  FilterConfig tv{FilterMode::TVCBF, 20.0, 0.0, 0.0, 1.0, std::nullopt};
  FilterConfig ra = tv;
  ra.mode = FilterMode::RaTVCBF;
  const Vec zero_rate = Vec::Zero(2);
  const auto ct = assemble_constraint(ev, e, s, 0.3, tv, shape);
  const auto cr = assemble_constraint(ev, e, s, 0.3, ra, shape, &zero_rate);
  EXPECT_TRUE(same_bits(ct.b, cr.b));
  EXPECT_TRUE(same_bits(ct.a[0], cr.a[0]));
  EXPECT_TRUE(same_bits(ct.robust_h, cr.robust_h));
  EXPECT_EQ(cr.gamma, 0.0);
  EXPECT_EQ(cr.tightening, 0.0);
}

TEST(AssembleConstraint, ApexGivesZeroInputRow) {
  const auto sched = BoundSchedule::constant(8.0, 12.0, 0.0, 1.0);
  const auto e = est(v2(1000, 10), v2(50, 5));
  const SysState s = SysState::scalar(0.01, 0.0);
  const FilterConfig cfg{FilterMode::RaTVCBF, 20.0, 0.0, 0.2, 1.0, std::nullopt};
  const auto c = assemble_constraint(eval_force_box(s, e, sched, 0.5), e, s, 0.5, cfg, PlantShape{1.0});
  EXPECT_EQ(c.a.norm(), 0.0);
  EXPECT_EQ(c.eta, 0.0);
}

TEST(AssembleConstraint, MonotoneInMargins) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(0, 1);
  const auto sched = BoundSchedule({0.0, 1.0}, {8.0, 10.0}, {12.0, 13.0});
  const PlantShape shape{1.0};
  const Vec full = v2(500, 90);
  for (int i = 0; i < 300; ++i) {
    const SysState s = SysState::scalar(0.004 + 0.01 * U(rng), 0.1 * U(rng) - 0.05);
    const Vec th = v2(900 + 600 * U(rng), 5 + 95 * U(rng));
    const double t = 0.9 * U(rng);
    const Vec rate = v2(100 * U(rng) - 50, 10 * U(rng) - 5);
    const BarrierEval ev = eval_force_box(s, est(th, Vec::Zero(2)), sched, t);
    if (ev.dh_dx.norm() == 0.0) continue;
    double prev = -INFINITY;
    for (double f : {0.0, 0.5, 1.0}) {
      const auto e = est(th, f * full);
      const auto c = assemble_constraint(ev, e, s, t, FilterConfig{FilterMode::RaTVCBF, 20, 0, 0.2, 1, {}}, shape, &rate);
      EXPECT_GE(c.b, prev);
      prev = c.b;
    }
    for (int j = 0; j < 2; ++j) {
      Vec lo = 0.3 * full, hi = lo;
      hi[j] = 0.8 * full[j];
      const FilterConfig cfg{FilterMode::RaTVCBF, 20, 0, 0.2, 1, {}};
      EXPECT_GE(assemble_constraint(ev, est(th, hi), s, t, cfg, shape, &rate).b,
                assemble_constraint(ev, est(th, lo), s, t, cfg, shape, &rate).b);
    }
    // b carries |a| delta - eps delta^2 / 4, increasing only up to delta = 2 |a| / eps
    const auto at = [&](double d) {
      return assemble_constraint(ev, est(th, 0.2 * full), s, t, FilterConfig{FilterMode::RaTVCBF, 20, 0, d, 1, {}}, shape,
                                 &rate);
    };
    const double b0 = at(0.0).b, a_norm = at(0.0).a.norm();
    prev = -INFINITY;
    for (double f : {0.0, 0.25, 0.5, 1.0}) {
      const double d = f * 2.0 * a_norm;
      const auto c = at(d);
      EXPECT_GE(c.b, prev);
      prev = c.b;
      EXPECT_NEAR(c.b - b0, a_norm * d - d * d / 4.0, 1e-9 * (1 + std::abs(b0)));
    }
  }
}

TEST(AssembleConstraint, DeltaMarginNotMonotoneNearApex) {
  // near the apex |a| is small and the ISSf enlargement outweighs eta
  const auto sched = BoundSchedule::constant(8.0, 12.0, 0.0, 1.0);
  const auto e = est(v2(1000, 10), Vec::Zero(2));
  const SysState s = SysState::scalar(0.01001, 0.0);
  const auto ev = eval_force_box(s, e, sched, 0.5);
  const Vec rate = Vec::Zero(2);
  auto b_at = [&](double d) {
    return assemble_constraint(ev, e, s, 0.5, FilterConfig{FilterMode::RaTVCBF, 20, 0, d, 1, {}}, PlantShape{1.0}, &rate).b;
  };
  EXPECT_LT(b_at(2.0), b_at(0.0));
}

TEST(FilterStep, PassesNominalMidCorridor) {
  const std::vector<BoundSchedule> sched{BoundSchedule::constant(5.0, 15.0, 0.0, 1.0)};
  const auto e = est(v2(1000, 10), Vec::Zero(2));
  const FilterConfig cfg{FilterMode::RaTVCBF, 20.0, 0.0, 0.0, 1.0, std::nullopt};
  const auto r = filter_step(SysState::scalar(0.01, 0.0), e, sched, 0.2, v1(10.0), cfg, PlantShape{1.0});
  EXPECT_EQ(r.u_safe[0], 10.0);
  EXPECT_FALSE(r.results[0].active);
}

TEST(FilterStep, ClipsAnOutsideReference) {
  // force near the top of the corridor with the nominal pushing well past it
  const std::vector<BoundSchedule> sched{BoundSchedule::constant(8.0, 12.0, 0.0, 1.0)};
  const auto e = est(v2(1000, 10), Vec::Zero(2));
  const FilterConfig cfg{FilterMode::TVCBF, 20.0, 0.0, 0.0, 1.0, std::nullopt};
  const auto r = filter_step(SysState::scalar(0.0118, 0.0), e, sched, 0.2, v1(40.0), cfg, PlantShape{1.0});
  EXPECT_TRUE(r.results[0].active);
  EXPECT_LT(r.u_safe[0], 40.0);
  EXPECT_NEAR(r.results[0].slack, 0.0, 1e-9);
}
