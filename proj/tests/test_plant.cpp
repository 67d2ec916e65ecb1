#include <ratvcbf/plant.hpp>
#include <ratvcbf/selftest.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace ratvcbf;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

TruePlant plant(double k, double b, double m = 1.0) { return {v1(k), v1(b), m}; }

}  // namespace

TEST(ContactForce, Examples) {
  EXPECT_EQ(contact_force(SysState::scalar(0, 0), v1(1234), v1(56))[0], 0.0);
  EXPECT_DOUBLE_EQ(contact_force(SysState::scalar(0.01, 0), v1(1400), v1(70))[0], 14.0);
  EXPECT_DOUBLE_EQ(contact_force(SysState::scalar(0.01, -0.05), v1(1000), v1(10))[0], 9.5);
}

TEST(ContactForce, RejectsNonFinite) {
  EXPECT_THROW(contact_force(SysState::scalar(std::nan(""), 0), v1(1), v1(1)), std::invalid_argument);
  EXPECT_THROW(contact_force(SysState::scalar(0, 0), v1(INFINITY), v1(1)), std::invalid_argument);
}

TEST(ContactForce, SuperpositionInStateAndParameters) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int i = 0; i < 200; ++i) {
    const double p1 = 0.02 * U(rng), v1_ = 0.1 * U(rng), p2 = 0.02 * U(rng), v2 = 0.1 * U(rng);
    const double k = 1000 + 500 * U(rng), b = 50 + 40 * U(rng);
    const double f12 = contact_force(SysState::scalar(p1 + p2, v1_ + v2), v1(k), v1(b))[0];
    const double f1 = contact_force(SysState::scalar(p1, v1_), v1(k), v1(b))[0];
    const double f2 = contact_force(SysState::scalar(p2, v2), v1(k), v1(b))[0];
    EXPECT_NEAR(f12, f1 + f2, 1e-12);
    const double g = contact_force(SysState::scalar(p1, v1_), v1(k + 7), v1(b + 3))[0];
    const double g1 = contact_force(SysState::scalar(p1, v1_), v1(7), v1(3))[0];
    EXPECT_NEAR(g, f1 + g1, 1e-12);
  }
}

TEST(Dynamics, Examples) {
  const auto pl = plant(1400, 70);
  const SysState s = SysState::scalar(0.01, 0.02);
  const double fc = 1400 * 0.01 + 70 * 0.02;
  EXPECT_NEAR(dynamics(s, pl, v1(fc), v1(0)).p_ddot[0], 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(dynamics(SysState::scalar(0.01, 0), pl, v1(0), v1(0)).p_ddot[0], -14.0);
  const auto a = dynamics(s, pl, v1(3.0), v1(-0.5));
  const auto b = dynamics(s, pl, v1(-0.5), v1(3.0));
  EXPECT_EQ(a.p_ddot[0], b.p_ddot[0]);
  EXPECT_EQ(a.p_dot[0], 0.02);
}

TEST(Dynamics, RejectsBadMass) {
  EXPECT_THROW(dynamics(SysState::scalar(0, 0), plant(1, 1, 0.0), v1(0), v1(0)), std::invalid_argument);
  EXPECT_THROW(dynamics(SysState::scalar(0, 0), plant(1, 1, -2.0), v1(0), v1(0)), std::invalid_argument);
}

TEST(Dynamics, AffineInInput) {
  const auto pl = plant(1400, 70, 2.5);
  const SysState s = SysState::scalar(0.004, -0.03);
  for (double du : {-3.0, 0.1, 17.0}) {
    const double base = dynamics(s, pl, v1(2.0), v1(0.3)).p_ddot[0];
    EXPECT_NEAR(dynamics(s, pl, v1(2.0 + du), v1(0.3)).p_ddot[0] - base, du / 2.5, 1e-12);
    EXPECT_NEAR(dynamics(s, pl, v1(2.0), v1(0.3 + du)).p_ddot[0] - base, du / 2.5, 1e-12);
  }
}

TEST(StepRk4, EquilibriumIsFixed) {
  const auto pl = plant(1400, 70);
  const SysState s = SysState::scalar(0.01, 0.0, 1.0);
  const SysState n = step_rk4(s, pl, v1(14.0), v1(0.0), 1e-3);
  EXPECT_NEAR(n.p[0], 0.01, 1e-12);
  EXPECT_NEAR(n.p_dot[0], 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(n.t, 1.001);
}

TEST(StepRk4, FreeMotionIsLinear) {
  const SysState n = step_rk4(SysState::scalar(0.2, -0.3), plant(0, 0), v1(0), v1(0), 0.05);
  EXPECT_NEAR(n.p[0], 0.2 - 0.3 * 0.05, 1e-15);
  EXPECT_EQ(n.p_dot[0], -0.3);
}

TEST(StepRk4, ConvergenceOrder) {
  // reference trajectory at dt = 1e-6
  EXPECT_GE(oracle::rk4_order(), 3.9);
}

TEST(StepRk4, RejectsNonPositiveStep) {
  EXPECT_THROW(step_rk4(SysState::scalar(0, 0), plant(1, 1), v1(0), v1(0), 0.0), std::invalid_argument);
}

TEST(Disturbance, ZeroKind) {
  DisturbanceSpec spec{0.5, DisturbanceKind::zero, 1.0, 4, 1, 1e-3};
  for (double t : {0.0, 0.3, 7.7}) EXPECT_EQ(disturbance_sample(spec, t)[0], 0.0);
}

TEST(Disturbance, SinusoidPeak) {
  DisturbanceSpec spec{1.0, DisturbanceKind::sinusoid, 1.0, 0, 1, 1e-3};
  EXPECT_NEAR(disturbance_sample(spec, 0.25)[0], 1.0, 1e-12);
}

TEST(Disturbance, BoundedOverAMillionSamples) {
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    DisturbanceSpec spec{0.0008, DisturbanceKind::sinusoid_plus_uniform, 1.0, seed, 2, 1e-3};
    double worst = 0.0;
    for (int i = 0; i < 1000000; ++i) worst = std::max(worst, disturbance_sample(spec, i * 3.1e-5).cwiseAbs().maxCoeff());
    EXPECT_LE(worst, 0.0008);
    EXPECT_GT(worst, 0.0006);
  }
}

TEST(Disturbance, DeterministicAndSeedDependent) {
  DisturbanceSpec a{0.1, DisturbanceKind::sinusoid_plus_uniform, 2.0, 5, 1, 1e-3};
  DisturbanceSpec b = a;
  b.seed = 6;
  int differ = 0;
  for (int i = 0; i < 100; ++i) {
    const double t = 0.0123 * i;
    EXPECT_EQ(disturbance_sample(a, t)[0], disturbance_sample(a, t)[0]);
    differ += disturbance_sample(a, t)[0] != disturbance_sample(b, t)[0];
  }
  EXPECT_GT(differ, 90);
}
