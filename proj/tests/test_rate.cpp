#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "tubewalk/rate.hpp"

using namespace tubewalk;

namespace {
constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

std::vector<RatePoint> synthetic(double slope, double intercept, double alpha) {
  std::vector<RatePoint> pts;
  for (std::size_t n : {10u, 20u, 40u, 80u})
    pts.push_back({n, slope * std::pow(static_cast<double>(n), 1 - 2 * alpha) + intercept});
  return pts;
}

CheckConfig base_check(EnvironmentSpec env) {
  CheckConfig cfg;
  cfg.env = std::move(env);
  cfg.tube = TubeSpec::constant(-1, 1, 0.3, 1);
  cfg.n_list = {200, 400, 800, 1600, 3200};
  cfg.seed = 2024;
  return cfg;
}
}  // namespace

TEST(DecayFit, NoiselessLine) {
  const auto fit = decay_fit(synthetic(-2, 0, 0.3), 0.3);
  EXPECT_NEAR(fit.slope, -2.0, 1e-12);
  EXPECT_NEAR(fit.intercept, 0.0, 1e-11);
  EXPECT_DOUBLE_EQ(fit.r_squared, 1.0);
  EXPECT_NEAR(fit.slope_ci95.first, -2.0, 1e-9);
}

TEST(DecayFit, WithIntercept) {
  const auto fit = decay_fit(synthetic(-2, 3, 0.3), 0.3);
  EXPECT_NEAR(fit.slope, -2.0, 1e-12);
  EXPECT_NEAR(fit.intercept, 3.0, 1e-11);
}

TEST(DecayFit, AffineEquivariant) {
  auto pts = synthetic(-1.3, 0.7, 0.2);
  pts[1].log_p += 0.4;  // noisy
  const auto a = decay_fit(pts, 0.2);
  for (auto& p : pts) p.log_p *= 2.5;
  const auto b = decay_fit(pts, 0.2);
  EXPECT_NEAR(b.slope, 2.5 * a.slope, 1e-12);
  EXPECT_NEAR(b.intercept, 2.5 * a.intercept, 1e-12);
  EXPECT_NEAR(b.r_squared, a.r_squared, 1e-12);
  EXPECT_LT(a.slope_ci95.first, a.slope);
  EXPECT_GT(a.slope_ci95.second, a.slope);
  EXPECT_GE(a.r_squared, 0.0);
  EXPECT_LE(a.r_squared, 1.0);
}

TEST(DecayFit, Errors) {
  auto pts = synthetic(-1, 0, 0.3);
  pts.resize(2);
  EXPECT_THROW(decay_fit(pts, 0.3), InvalidSpec);
  pts = synthetic(-1, 0, 0.3);
  pts[0].log_p = -INFINITY;
  pts[1].log_p = NAN;
  EXPECT_THROW(decay_fit(pts, 0.3), InvalidSpec);
  pts = synthetic(-1, 0, 0.3);
  pts[2].n = pts[1].n;
  EXPECT_THROW(decay_fit(pts, 0.3), InvalidSpec);
}

TEST(DecayFit, RademacherDpSlopeNearMogulskii) {
  std::vector<RatePoint> pts;
  for (std::size_t n : {200u, 400u, 800u, 1600u, 3200u}) {
    const auto env = sample_environment(EnvironmentSpec::rademacher(), n, 1);
    pts.push_back({n, survival_dp_lattice(env, TubeSpec::constant(-1, 1, 0.3, n), 0.0).log_p});
  }
  const auto fit = decay_fit(pts, 0.3);
  EXPECT_LE(std::abs(fit.slope / (-kPi2 / 8) - 1.0), 0.15);
}

TEST(OffsetRule, PowerFunction) {
  const OffsetRule f{1.0, 0.5};
  EXPECT_EQ(f(400), 20u);
  EXPECT_EQ(f(10), 3u);
  EXPECT_EQ((OffsetRule{0.0, 1.0})(50), 1u);  // positive-integer valued
}

TEST(EstimateSurvival, AutoPicksDpForLatticeAndGridOtherwise) {
  const auto lat = sample_environment(EnvironmentSpec::rademacher(), 50, 1);
  const auto gau = sample_environment(EnvironmentSpec::random_mean_gaussian(0.5, 1), 50, 1);
  const auto tube = TubeSpec::constant(-1, 1, 0.3, 50);
  EXPECT_EQ(estimate_survival(lat, tube, 0.0, {}, 1).method, Method::DpLattice);
  EXPECT_EQ(estimate_survival(gau, tube, 0.0, {}, 1).method, Method::Grid);
  EXPECT_THROW(estimate_survival(gau, tube, 0.0, {.method = EstimatorKind::DpLattice}, 1), EstimatorError);
}

TEST(TheoremCheck, DegenerateRademacherWithinTwentyPercent) {
  const auto rep = theorem_check(base_check(EnvironmentSpec::rademacher()));
  EXPECT_NEAR(rep.predicted, -kPi2 / 8, 1e-10);
  EXPECT_NEAR(rep.c_gh, 0.25, 1e-12);
  EXPECT_LE(rep.discrepancy, 0.20);
  EXPECT_TRUE(rep.pass);
  ASSERT_EQ(rep.rows.size(), 5u);
  for (const auto& r : rep.rows) EXPECT_EQ(r.estimate.method, Method::DpLattice);
}

TEST(TheoremCheck, EnvironmentIncreasesDecayAndCurvedTubeDecreasesIt) {
  auto deg = base_check(EnvironmentSpec::rademacher());
  auto rsb = base_check(EnvironmentSpec::random_shift_bernoulli(0.5, 2));
  rsb.gamma = {GammaSource::Kind::Estimate, 4.0, 2e-3, 150, 8};
  const auto a = theorem_check(deg);
  const auto b = theorem_check(rsb);
  EXPECT_GT(std::abs(b.fit.slope), std::abs(a.fit.slope));
  EXPECT_DOUBLE_EQ(b.beta, 0.5);
  ASSERT_TRUE(b.gamma_estimate);
  EXPECT_GT(b.gamma_value, kPi2 / 2);

  auto curved = deg;
  curved.tube.g = PiecewiseLinear::linear(-1, -2);
  curved.tube.h = PiecewiseLinear::linear(1, 2);
  const auto c = theorem_check(curved);
  EXPECT_LT(std::abs(c.fit.slope), std::abs(a.fit.slope));
  EXPECT_NEAR(c.c_gh, 1.0 / 8.0, 1e-10);  // int_0^1 (2 + 2s)^{-2} ds
}

TEST(TheoremCheck, ReferenceGammaRejectedForRandomEnvironment) {
  auto cfg = base_check(EnvironmentSpec::random_shift_bernoulli(0.5, 2));
  cfg.n_list = {50, 100, 200};
  EXPECT_THROW(theorem_check(cfg), InvalidSpec);
}

TEST(TheoremCheck, SharedEnvironmentAndSweep) {
  auto cfg = base_check(EnvironmentSpec::random_shift_bernoulli(0.5, 2));
  cfg.n_list = {100, 200, 400};
  cfg.gamma = {GammaSource::Kind::Estimate, 2.0, 4e-3, 100, 8};
  cfg.shared_environment = true;
  const auto shared = theorem_check(cfg);
  EXPECT_EQ(shared.rows[0].env_seed, shared.rows[2].env_seed);
  cfg.shared_environment = false;
  cfg.tube.start_window = Window{-0.5, 0.5};
  cfg.sweep_start = true;
  const auto swept = theorem_check(cfg);
  EXPECT_NE(swept.rows[0].env_seed, swept.rows[1].env_seed);
  cfg.sweep_start = false;
  const auto centre = theorem_check(cfg);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(swept.rows[i].estimate.log_p, centre.rows[i].estimate.log_p);
}

TEST(TheoremCheck, ErrorsCarryOffendingN) {
  auto cfg = base_check(EnvironmentSpec::random_mean_gaussian(0.5, 1));
  cfg.n_list = {20, 40, 80};
  cfg.estimator.method = EstimatorKind::DpLattice;
  try {
    theorem_check(cfg);
    FAIL();
  } catch (const EstimatorError& e) {
    EXPECT_NE(std::string(e.what()).find("theorem_check: n="), std::string::npos);
  }
}
