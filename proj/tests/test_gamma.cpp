#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include "tubewalk/gamma.hpp"

using namespace tubewalk;

namespace {
constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

std::vector<double> brownian_increments(std::size_t steps, double dt, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> dw(steps);
  for (double& x : dw) x = std::sqrt(dt) * rng.normal();
  return dw;
}
}  // namespace

TEST(Reference, Constants) {
  EXPECT_NEAR(ReferenceRates::bm_tube_rate(1, 2), 1.2337005501361697, 1e-15);
  EXPECT_NEAR(ReferenceRates::bm_tube_rate(1, 1), kPi2 / 2, 1e-15);
  EXPECT_DOUBLE_EQ(reference_rates().gamma_zero(), ReferenceRates::bm_tube_rate(1, 1));
  EXPECT_THROW(ReferenceRates::bm_tube_rate(0, 1), InvalidSpec);
}

TEST(Confinement, ZeroIncrementsIgnoreBeta) {
  const std::vector<double> dw(500, 0.0);
  const double base = quenched_bm_confinement(dw, 0.0, 1e-3, 100);
  EXPECT_EQ(quenched_bm_confinement(dw, 3.7, 1e-3, 100), base);
}

TEST(Confinement, ShortHorizonWideTube) {
  const std::vector<double> dw(1, 0.0);
  EXPECT_NEAR(quenched_bm_confinement(dw, 0.0, 1e-6, 100), 1.0, 1e-12);
}

TEST(Confinement, OutsideStartAndBadArguments) {
  const std::vector<double> dw(10, 0.0);
  EXPECT_EQ(quenched_bm_confinement(dw, 0.0, 1e-3, 100, 0.6), 0.0);
  EXPECT_THROW(quenched_bm_confinement(dw, 0.0, 0.0, 100), InvalidSpec);
  EXPECT_THROW(quenched_bm_confinement(dw, 0.0, 1e-3, 49), InvalidSpec);
  EXPECT_THROW(quenched_bm_confinement(dw, 0.0, 1.0, 100), InvalidSpec);  // barrier shift swallows the tube
}

// beta = 0, t = 8, dt = 1e-3, grid 400: slope of -ln P over t in {4, 6, 8}.
TEST(Confinement, RecoversGammaZeroFromMultiHorizonFit) {
  const std::vector<double> dw(8000, 0.0);
  const auto trace = confinement_log_trace(dw, 0.0, 1e-3, 400, 0.0);
  const double horizons[] = {4.0, 6.0, 8.0};
  const double rate = confinement_rate(trace, 1e-3, horizons);
  EXPECT_GE(rate, 0.95 * kPi2 / 2);
  EXPECT_LE(rate, 1.05 * kPi2 / 2);
}

TEST(Confinement, UncorrectedMonitoringUnderestimatesRate) {
  const std::vector<double> dw(4000, 0.0);
  const double horizons[] = {2.0, 3.0, 4.0};
  const double corrected = confinement_rate(confinement_log_trace(dw, 0.0, 1e-3, 200, 0.0), 1e-3, horizons);
  const double raw = confinement_rate(
      confinement_log_trace(dw, 0.0, 1e-3, 200, 0.0, {.half_width = 0.5, .continuity_correction = false}), 1e-3,
      horizons);
  EXPECT_LT(raw, corrected);
  EXPECT_LT(raw, 0.95 * kPi2 / 2);
}

// Width x lambda, dt x lambda^2, W increments x lambda: same discrete chain.
TEST(Confinement, BrownianScaling) {
  const double dt = 2e-3, beta = 0.8;
  const auto dw = brownian_increments(1000, dt, 5);
  const double base = quenched_bm_confinement(dw, beta, dt, 200, 0.1);
  for (double lambda : {0.5, 2.0, 3.0}) {
    std::vector<double> scaled(dw);
    for (double& x : scaled) x *= lambda;
    const double p = quenched_bm_confinement(scaled, beta, dt * lambda * lambda, 200, 0.1 * lambda,
                                             {.half_width = 0.5 * lambda});
    EXPECT_NEAR(p, base, 1e-3 * base) << lambda;
  }
}

TEST(Confinement, MassNonincreasingInTimeAndDrift) {
  const double dt = 1e-3;
  std::vector<double> dw = brownian_increments(2000, dt, 9);
  for (double& x : dw) x = std::abs(x);
  const auto t0 = confinement_log_trace(dw, 0.5, dt, 100, 0.0);
  for (std::size_t k = 1; k < t0.size(); ++k) ASSERT_LE(t0[k], t0[k - 1] + 1e-12);
  double prev = 1.0;
  for (double beta : {0.0, 0.5, 1.0, 2.0}) {
    const double p = quenched_bm_confinement(dw, beta, dt, 100, 0.0);
    EXPECT_LE(p, prev);
    prev = p;
  }
}

// Doubling grid points and halving dt moves -ln P / t by less than 1%.
TEST(Confinement, GridRefinementStable) {
  const double horizons[] = {4.0, 6.0, 8.0};
  const double coarse = confinement_rate(confinement_log_trace(std::vector<double>(8000, 0.0), 0.0, 1e-3, 400, 0.0), 1e-3, horizons);
  const double fine = confinement_rate(confinement_log_trace(std::vector<double>(16000, 0.0), 0.0, 5e-4, 800, 0.0), 5e-4, horizons);
  EXPECT_LT(std::abs(fine / coarse - 1.0), 0.01);
}

TEST(EstimateGamma, BetaZeroMatchesDeterministicRun) {
  const auto e = estimate_gamma(0.0, 4.0, 2e-3, 200, 8, 1);
  ASSERT_EQ(e.per_replica_values.size(), 8u);
  const double horizons[] = {2.0, 3.0, 4.0};
  const double single = confinement_rate(confinement_log_trace(std::vector<double>(2000, 0.0), 0.0, 2e-3, 200, 0.0), 2e-3, horizons);
  for (double v : e.per_replica_values) EXPECT_EQ(v, single);
  EXPECT_EQ(e.gamma_hat, single);
  EXPECT_EQ(e.ci95.first, e.ci95.second);
  EXPECT_NEAR(e.gamma_hat, kPi2 / 2, 0.05 * kPi2 / 2);
}

TEST(EstimateGamma, IncreasingInBeta) {
  const auto g0 = estimate_gamma(0.0, 4.0, 2e-3, 150, 8, 3);
  const auto g1 = estimate_gamma(0.5, 4.0, 2e-3, 150, 8, 3);
  const auto g2 = estimate_gamma(1.0, 4.0, 2e-3, 150, 8, 3);
  EXPECT_LT(g0.ci95.second, g1.ci95.first);
  EXPECT_LT(g1.ci95.second, g2.ci95.first);
  EXPECT_GT(g1.gamma_hat, 0.0);
  EXPECT_NEAR(g1.gamma_hat, std::accumulate(g1.per_replica_values.begin(), g1.per_replica_values.end(), 0.0) / 8, 1e-12);
}

TEST(EstimateGamma, DeterministicGivenSeed) {
  const auto a = estimate_gamma(0.7, 2.0, 2e-3, 100, 8, 12);
  const auto b = estimate_gamma(0.7, 2.0, 2e-3, 100, 8, 12);
  EXPECT_EQ(a.per_replica_values, b.per_replica_values);
  EXPECT_THROW(estimate_gamma(0.7, 2.0, 2e-3, 100, 7, 12), InvalidSpec);
  EXPECT_THROW(estimate_gamma(-0.1, 2.0, 2e-3, 100, 8, 12), InvalidSpec);
}

TEST(MeanCi, StudentT) {
  const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8};
  const auto [m, ci] = mean_ci95(v);
  EXPECT_DOUBLE_EQ(m, 4.5);
  // t_{0.975, 7} = 2.364624..., sd = sqrt(6)
  EXPECT_NEAR(ci.second - m, 2.3646242510102993 * std::sqrt(6.0) / std::sqrt(8.0), 1e-9);
}
