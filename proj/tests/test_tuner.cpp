#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pnrace/tuner.hpp"

using namespace pnrace;

namespace {

Eigen::VectorXd pt(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

KernelParams params(double ls, double var, double noise) {
  KernelParams p;
  p.lengthscales = Eigen::VectorXd::Constant(2, ls);
  p.variance = var;
  p.noise_var = noise;
  return p;
}

}  // namespace

TEST(Reward, DistanceTimeAndDistanceOnly) {
  EXPECT_NEAR(reward(RewardConfig::distance_time(), 4.32, 0.0), 2.3148, 1e-4);
  EXPECT_DOUBLE_EQ(reward(RewardConfig::distance(), 2.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(reward(RewardConfig::distance(), 2.0, 0.0), 3.0);
  EXPECT_THROW(reward(RewardConfig{}, 0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(reward(RewardConfig{}, 1.0, -0.1), std::invalid_argument);
}

TEST(Reward, MonotoneInDistanceAndTime) {
  const RewardConfig cfg = RewardConfig::distance_time();
  for (double t = 1.0; t < 6.0; t += 0.5) {
    for (double d = 0.0; d < 1.0; d += 0.1) {
      EXPECT_LE(reward(cfg, t, d + 0.05), reward(cfg, t, d));
      EXPECT_LE(reward(cfg, t + 0.1, d), reward(cfg, t, d));
    }
  }
}

TEST(Matern25, KnownValues) {
  const Eigen::VectorXd ls = Eigen::VectorXd::Ones(2);
  EXPECT_DOUBLE_EQ(matern25(pt(0.3, 0.4), pt(0.3, 0.4), ls, 2.5), 2.5);
  EXPECT_NEAR(matern25(pt(0, 0), pt(1, 0), ls, 1.0), 0.5240, 1e-4);
  const double s5 = std::sqrt(5.0);
  EXPECT_NEAR(matern25(pt(0, 0), pt(0.6, 0.8), ls, 1.0), (1 + s5 + 5.0 / 3) * std::exp(-s5), 1e-15);
  EXPECT_LT(matern25(pt(0, 0), pt(100, 0), ls, 1.0), 1e-80);
  // Per-dimension lengthscales scale the distance.
  Eigen::VectorXd ls2(2);
  ls2 << 2.0, 0.5;
  EXPECT_NEAR(matern25(pt(0, 0), pt(2, 0), ls2, 1.0), matern25(pt(0, 0), pt(0, 0.5), ls2, 1.0), 1e-15);
}

TEST(GpModel, NoiselessInterpolation) {
  GpModel gp(2, params(0.3, 1.0, 0.0));
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::pair<Eigen::VectorXd, double>> data;
  for (int i = 0; i < 15; ++i) {
    const Eigen::VectorXd x = pt(u(rng), u(rng));
    data.emplace_back(x, std::sin(5 * x(0)) + x(1) * x(1));
    gp.add_sample(x, data.back().second);
  }
  for (const auto& [x, y] : data) {
    const auto p = gp.posterior(x);
    EXPECT_NEAR(p.mean, y, 1e-6);
    EXPECT_NEAR(p.variance, 0.0, 1e-6);
  }
}

TEST(GpModel, RevertsToPriorFarFromData) {
  GpModel gp(2, params(0.1, 2.0, 1e-6));
  gp.add_sample(pt(0, 0), 1.0);
  gp.add_sample(pt(0.1, 0), 3.0);
  const auto p = gp.posterior(pt(50, 50));
  EXPECT_NEAR(p.mean, gp.prior_mean(), 1e-12);
  EXPECT_NEAR(p.mean, 2.0, 1e-12);
  EXPECT_NEAR(p.variance, 2.0, 1e-12);
}

TEST(GpModel, SymmetricPairMidpointIsAverage) {
  GpModel gp(2, params(0.4, 1.0, 1e-6));
  gp.add_sample(pt(0.2, 0.5), 1.0);
  gp.add_sample(pt(0.8, 0.5), 5.0);
  EXPECT_NEAR(gp.posterior(pt(0.5, 0.5)).mean, 3.0, 1e-12);
}

TEST(GpModel, EmptyModelReturnsPrior) {
  GpModel gp(2);
  const auto p = gp.posterior(pt(0.5, 0.5));
  EXPECT_EQ(p.mean, 0.0);
  EXPECT_EQ(p.variance, gp.params().variance);
}

TEST(GpModel, DuplicatePointsNeedJitterOnly) {
  GpModel gp(2, params(0.3, 1.0, 0.0));
  gp.add_sample(pt(0.5, 0.5), 1.0);
  EXPECT_NO_THROW(gp.add_sample(pt(0.5, 0.5), 1.0));
  EXPECT_GE(gp.posterior(pt(0.2, 0.2)).variance, 0.0);
}

TEST(GpModel, IndefiniteKernelFails) {
  GpModel gp(2, params(0.3, 0.5, 0.0));
  gp.add_sample(pt(0.5, 0.5), 1.0);
  EXPECT_THROW(gp.set_params(params(0.3, 0.5, -1.0)), NumericalFailureError);
}

TEST(GpModel, RejectsBadParameters) {
  EXPECT_THROW(GpModel(2, params(-1, 1, 0)), std::invalid_argument);
  EXPECT_THROW(GpModel(3, params(1, 1, 0)), std::invalid_argument);
  GpModel gp(2);
  EXPECT_THROW(gp.add_sample(Eigen::VectorXd::Zero(3), 0.0), std::invalid_argument);
}

TEST(GpModel, FitImprovesLikelihood) {
  GpModel gp(2, params(2.5, 10.0, 1e-3));
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd x = pt(u(rng), u(rng));
    gp.add_sample(x, std::sin(8 * x(0)) * std::cos(3 * x(1)));
  }
  const double before = gp.log_marginal_likelihood();
  gp.fit_hyperparameters(1);
  EXPECT_GT(gp.log_marginal_likelihood(), before);
  EXPECT_GE(gp.params().noise_var, kNoiseFloor * (1 - 1e-12));
  EXPECT_LT(gp.params().lengthscales(0), 2.5);
}

TEST(SearchSpace, UnitMapping) {
  const SearchSpace s;
  EXPECT_TRUE(s.from_unit(Vec2(0, 0)).isApprox(Vec2(0.3, deg2rad(5))));
  EXPECT_TRUE(s.from_unit(Vec2(1, 1)).isApprox(Vec2(3.0, deg2rad(30))));
  const Vec2 x(1.7, deg2rad(12));
  EXPECT_TRUE(s.from_unit(s.to_unit(x)).isApprox(x));
  SearchSpace point{Vec2(2, 0.3), Vec2(2, 0.3)};
  EXPECT_TRUE(point.to_unit(Vec2(2, 0.3)).isApprox(Vec2(0.5, 0.5)));
  EXPECT_THROW((SearchSpace{Vec2(1, 1), Vec2(0, 2)}.validate()), std::invalid_argument);
}

TEST(Sobol, FirstPoints) {
  const auto p = sobol_points(4);
  EXPECT_TRUE(p[0].isApprox(Vec2(0.5, 0.5)));
  EXPECT_TRUE(p[1].isApprox(Vec2(0.75, 0.25)));
  EXPECT_TRUE(p[2].isApprox(Vec2(0.25, 0.75)));
  EXPECT_TRUE(p[3].isApprox(Vec2(0.375, 0.375)));
}

TEST(UcbNext, EmptyModelPicksCenter) {
  const SearchSpace s;
  EXPECT_TRUE(ucb_next(GpModel(2), s, 4.0).isApprox(s.from_unit(Vec2(0.5, 0.5))));
}

TEST(UcbNext, ExploresAwayFromSingleObservation) {
  const SearchSpace s{Vec2(0, 0), Vec2(1, 1)};
  GpModel gp(2, params(0.2, 1.0, 1e-6));
  gp.add_sample(pt(0.5, 0.5), 1.0);
  const Vec2 next = ucb_next(gp, s, 100.0);
  EXPECT_GT((next - Vec2(0.5, 0.5)).norm(), 0.5);
}

TEST(UcbNext, ZeroBetaMaximizesPosteriorMean) {
  const SearchSpace s{Vec2(0, 0), Vec2(1, 1)};
  GpModel gp(2, params(0.25, 1.0, 1e-6));
  gp.add_sample(pt(0.1, 0.1), 0.0);
  gp.add_sample(pt(0.6, 0.7), 2.0);
  gp.add_sample(pt(0.9, 0.2), 0.5);
  const Vec2 next = ucb_next(gp, s, 0.0);
  double best = -1e9;
  for (int i = 0; i <= 400; ++i) {
    for (int j = 0; j <= 400; ++j) best = std::max(best, gp.posterior(pt(i / 400.0, j / 400.0)).mean);
  }
  EXPECT_GE(gp.posterior(pt(next(0), next(1))).mean, best - 1e-9);
}

TEST(UcbNext, StaysInsideBox) {
  const SearchSpace s;
  GpModel gp(2, params(0.3, 1.0, 1e-6));
  // Increasing toward a corner: the acquisition peaks on the boundary.
  gp.add_sample(pt(0.2, 0.2), 0.0);
  gp.add_sample(pt(0.9, 0.9), 5.0);
  const Vec2 next = ucb_next(gp, s, 1.0);
  EXPECT_TRUE((next.array() >= s.lo.array()).all());
  EXPECT_TRUE((next.array() <= s.hi.array()).all());
}

TEST(BayesOptimize, CollapsedSpaceReturnsThePoint) {
  const SearchSpace s{Vec2(2.1, 0.36), Vec2(2.1, 0.36)};
  BoOptions opt;
  opt.iterations = 1;
  int calls = 0;
  const auto r = bayes_optimize(s, [&](const Vec2&) { ++calls; return 1.0; }, opt);
  EXPECT_EQ(calls, 1);
  EXPECT_TRUE(r.best.isApprox(Vec2(2.1, 0.36)));
}

TEST(BayesOptimize, FindsQuadraticPeak) {
  const SearchSpace s{Vec2(0, 0), Vec2(1, 1)};
  BoOptions opt;
  opt.iterations = 20;
  const auto r = bayes_optimize(s, [](const Vec2& x) { return -(x - Vec2(0.7, 0.3)).squaredNorm(); }, opt);
  EXPECT_EQ(r.history.size(), 20u);
  EXPECT_LT((r.best - Vec2(0.7, 0.3)).norm(), 0.05);
}

TEST(BayesOptimize, DeterministicGivenSeed) {
  const SearchSpace s{Vec2(-5, 0), Vec2(10, 15)};
  BoOptions opt;
  opt.iterations = 10;
  opt.seed = 9;
  opt.shift_sobol = true;
  const auto f = [](const Vec2& x) { return -oracle::branin(x(0), x(1)); };
  const auto a = bayes_optimize(s, f, opt), b = bayes_optimize(s, f, opt);
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].x, b.history[i].x);
}
