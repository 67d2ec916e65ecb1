#include <ratvcbf/selftest.hpp>
#include <ratvcbf/smid.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace ratvcbf;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

const Vec kThetaStar = v2(1400, 70);
const ParamBox kPrior{v2(900, 0), v2(1500, 100)};

}  // namespace

TEST(MakeDatum, NoiselessIdentity) {
  const PlantShape shape{1.0};
  const TruePlant pl{Vec::Constant(1, 1400), Vec::Constant(1, 70), 1.0};
  const SysState s = SysState::scalar(0.012, -0.04);
  const Vec u = Vec::Constant(1, 9.0);
  const auto r = make_datum(s, dynamics(s, pl, u, Vec::Zero(1)), u, shape);
  EXPECT_NEAR((r.Y - r.D * kThetaStar).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(MakeDatum, DisturbanceBoundPropagates) {
  const double m = 2.0;
  const PlantShape shape{m};
  const TruePlant pl{Vec::Constant(1, 1400), Vec::Constant(1, 70), m};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int i = 0; i < 200; ++i) {
    const SysState s = SysState::scalar(0.02 * U(rng), 0.1 * U(rng));
    const Vec u = Vec::Constant(1, 20 * U(rng)), d = Vec::Constant(1, 0.3 * U(rng));
    const auto r = make_datum(s, dynamics(s, pl, u, d), u, shape);
    EXPECT_LE((r.Y - r.D * kThetaStar).cwiseAbs().maxCoeff(), 0.3 / m + 1e-12);
  }
}

TEST(MakeDatum, ZeroStateIsUninformative) {
  const auto r = make_datum(SysState::scalar(0, 0), StateDeriv{Vec::Zero(1), Vec::Constant(1, 0.0)}, Vec::Zero(1),
                            PlantShape{1.0});
  EXPECT_EQ(r.D.norm(), 0.0);
  EXPECT_EQ(r.Y.norm(), 0.0);
}

TEST(SmidUpdate, UninformativeBatchKeepsBox) {
  RegressionDatum r{Vec::Zero(2), Mat::Zero(2, 2), 0.0};
  r.Y[1] = 0.0005;
  const auto up = update(kPrior, {r, r}, 0.0008);
  EXPECT_TRUE(up.consistent);
  EXPECT_EQ(up.box.lower, kPrior.lower);
  EXPECT_EQ(up.box.upper, kPrior.upper);
}

TEST(SmidUpdate, ScalarInterval) {
  const ParamBox box{Vec::Constant(1, 0.0), Vec::Constant(1, 100.0)};
  RegressionDatum r{Vec::Constant(1, 10.0), Mat::Constant(1, 1, 1.0), 0.0};
  const auto up = update(box, {r}, 0.5);
  EXPECT_TRUE(up.consistent);
  EXPECT_DOUBLE_EQ(up.box.lower[0], 9.5);
  EXPECT_DOUBLE_EQ(up.box.upper[0], 10.5);
}

TEST(SmidUpdate, InconsistentBatchLeavesBoxUnchanged) {
  const ParamBox box{Vec::Constant(1, 0.0), Vec::Constant(1, 100.0)};
  RegressionDatum a{Vec::Constant(1, 10.0), Mat::Constant(1, 1, 1.0), 0.0};
  RegressionDatum b{Vec::Constant(1, 20.0), Mat::Constant(1, 1, 1.0), 0.0};
  const auto up = update(box, {a, b}, 0.5);
  EXPECT_FALSE(up.consistent);
  EXPECT_EQ(up.box.lower, box.lower);
  EXPECT_EQ(up.box.upper, box.upper);
}

TEST(SmidUpdate, EdgeCases) {
  EXPECT_EQ(update(kPrior, {}, 0.1).box.lower, kPrior.lower);
  RegressionDatum r{Vec::Zero(2), Mat::Zero(2, 2), 0.0};
  EXPECT_THROW(update(kPrior, {r}, 0.0), std::invalid_argument);
}

// criterion-4 oracle: exact slices on 2001 grid lines per coordinate
TEST(SmidUpdate, MatchesDenseGridOnRandomBatches) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> U(0, 1);
  const int cells = 2000;
  int checked = 0;
  for (int s = 0; s < 100; ++s) {
    const double eps = 0.05 + 0.3 * U(rng);
    const auto batch = oracle::synthetic_batch(kThetaStar, eps, 5, rng);
    const auto up = update(kPrior, batch, eps);
    const auto g = oracle::smid_grid(kPrior, batch, eps, cells);
    ASSERT_TRUE(up.consistent);
    ASSERT_TRUE(g.feasible);
    EXPECT_TRUE(up.box.contains(kThetaStar, 1e-9));
    EXPECT_TRUE(up.box.within(kPrior));
    for (int i = 0; i < 2; ++i) {
      EXPECT_GE(g.lower[i], up.box.lower[i] - 1e-9) << "batch " << s;
      EXPECT_LE(g.lower[i] - up.box.lower[i], g.cell[i] + 1e-9) << "batch " << s;
      EXPECT_LE(g.upper[i], up.box.upper[i] + 1e-9) << "batch " << s;
      EXPECT_LE(up.box.upper[i] - g.upper[i], g.cell[i] + 1e-9) << "batch " << s;
    }
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(SmidUpdate, SoundAndMonotoneAcrossSequentialBatches) {
  std::mt19937_64 rng(5);
  const double eps = 0.0008;
  ParamBox box = kPrior;
  const Vec th_hat = v2(1000, 10);
  Vec vt = vartheta_from_box(box, box.clamp(th_hat));
  for (int s = 0; s < 200; ++s) {
    const auto up = update(box, oracle::synthetic_batch(kThetaStar, eps, 5, rng), eps);
    ASSERT_TRUE(up.consistent);
    EXPECT_TRUE(up.box.within(box));
    EXPECT_TRUE(up.box.contains(kThetaStar, 1e-9));
    box = up.box;
    const Vec nvt = vartheta_from_box(box, box.clamp(th_hat));
    EXPECT_TRUE((nvt.array() <= vt.array()).all());
    vt = nvt;
  }
  EXPECT_LT(vt.maxCoeff(), 90.0);
}

TEST(SmidUpdate, ThreeParameterEnumeration) {
  // k = 3 goes through vertex enumeration; compare against the k = 2 path with a fixed third coordinate
  const ParamBox box3{(Vec(3) << 900, 0, -1).finished(), (Vec(3) << 1500, 100, 1).finished()};
  std::mt19937_64 rng(9);
  const auto batch2 = oracle::synthetic_batch(kThetaStar, 0.2, 5, rng);
  std::vector<RegressionDatum> batch3;
  for (const auto& r : batch2) {
    Mat D = Mat::Zero(2, 3);
    D.leftCols(2) = r.D;
    batch3.push_back({r.Y, D, r.t});
  }
  const auto a = update(kPrior, batch2, 0.2);
  const auto b = update(box3, batch3, 0.2);
  ASSERT_TRUE(b.consistent);
  EXPECT_NEAR((b.box.lower.head(2) - a.box.lower).norm(), 0.0, 1e-6);
  EXPECT_NEAR((b.box.upper.head(2) - a.box.upper).norm(), 0.0, 1e-6);
  EXPECT_EQ(b.box.lower[2], -1.0);
  EXPECT_EQ(b.box.upper[2], 1.0);
}

TEST(VarthetaFromBox, Examples) {
  EXPECT_EQ(vartheta_from_box(kPrior, v2(1000, 10)), v2(500, 90));
  const ParamBox point{v2(1200, 40), v2(1200, 40)};
  EXPECT_EQ(vartheta_from_box(point, v2(1200, 40)).norm(), 0.0);
  EXPECT_GT(vartheta_from_box(ParamBox{v2(1200, 40), v2(1200, 41)}, v2(1200, 40)).norm(), 0.0);
  EXPECT_THROW(vartheta_from_box(kPrior, v2(800, 10)), std::invalid_argument);
}
