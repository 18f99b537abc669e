#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "tubewalk/error.hpp"
#include "tubewalk/parallel.hpp"
#include "tubewalk/quench_dp.hpp"
#include "tubewalk/rng.hpp"

namespace tubewalk {

/// -zeta(1/2) / sqrt(2 pi): a Brownian path monitored every dt behaves like a
/// continuously monitored one with each barrier moved out by this times
/// sqrt(dt) (Broadie, Glasserman & Kou 1997).
inline constexpr double kDiscreteMonitoringShift = 0.5825971579390106;

struct ConfinementOptions {
  double half_width = 0.5;
  // Pull the absorbing barriers in by kDiscreteMonitoringShift * sqrt(dt) so
  // the dt-monitored chain approximates the continuous-time event.
  bool continuity_correction = true;
};

/// ln P(|Y| <= half_width at every grid time up to step k), k = 0..steps, for
/// Y = B - beta W with W given by its increments. Y's step k is
/// N(-beta dW_k, dt), propagated on a uniform grid of bin centers with
/// bin-edge CDF transition masses.
inline std::vector<double> confinement_log_trace(std::span<const double> w_increments, double beta,
                                                 double dt, std::size_t grid_points, double y0,
                                                 ConfinementOptions opt = {}) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidSpec("confinement: dt must be positive");
  if (grid_points < 50) throw InvalidSpec("confinement: grid_points must be >= 50");
  if (!(opt.half_width > 0.0)) throw InvalidSpec("confinement: half_width must be positive");
  const std::size_t steps = w_increments.size();
  if (!(std::abs(y0) <= opt.half_width)) return std::vector<double>(steps + 1, detail::kNegInf);

  const double s = std::sqrt(dt);
  const double edge = opt.half_width - (opt.continuity_correction ? kDiscreteMonitoringShift * s : 0.0);
  if (!(edge > 0.0)) throw InvalidSpec("confinement: dt too large for the tube width");
  const auto G = static_cast<long>(grid_points);
  const double h = 2.0 * edge / static_cast<double>(G);
  const double lower = -edge;

  SubDensity dens;
  dens.grid.resize(grid_points);
  for (long k = 0; k < G; ++k) dens.grid[static_cast<std::size_t>(k)] = lower + (static_cast<double>(k) + 0.5) * h;
  dens.mass.assign(grid_points, 0.0);

  std::vector<double> trace{0.0};
  trace.reserve(steps + 1);
  std::vector<double> next(grid_points), kernel(static_cast<std::size_t>(2 * G - 1));

  for (std::size_t step = 0; step < steps; ++step) {
    const double mu = -beta * w_increments[step];
    if (step == 0) {
      double prev = detail::std_normal_cdf((lower - y0 - mu) / s);
      for (long k = 0; k < G; ++k) {
        const double cur = detail::std_normal_cdf((lower + static_cast<double>(k + 1) * h - y0 - mu) / s);
        next[static_cast<std::size_t>(k)] = cur - prev;
        prev = cur;
      }
    } else {
      // Mass from bin j to bin k depends on d = k - j only.
      const long d_lo = std::max(-(G - 1), static_cast<long>(std::floor((mu - 10.0 * s) / h)) - 1);
      const long d_hi = std::min(G - 1, static_cast<long>(std::ceil((mu + 10.0 * s) / h)) + 1);
      double prev = detail::std_normal_cdf(((static_cast<double>(d_lo) - 0.5) * h - mu) / s);
      for (long d = d_lo; d <= d_hi; ++d) {
        const double cur = detail::std_normal_cdf(((static_cast<double>(d) + 0.5) * h - mu) / s);
        kernel[static_cast<std::size_t>(d + G - 1)] = cur - prev;
        prev = cur;
      }
      for (long k = 0; k < G; ++k) {
        const long j_lo = std::max(0L, k - d_hi);
        const long j_hi = std::min(G - 1, k - d_lo);
        double acc = 0.0;
        for (long j = j_lo; j <= j_hi; ++j)
          acc += dens.mass[static_cast<std::size_t>(j)] * kernel[static_cast<std::size_t>(k - j + G - 1)];
        next[static_cast<std::size_t>(k)] = acc;
      }
    }
    dens.mass.swap(next);
    const double ls = detail::renormalize(dens.mass);
    dens.log_total += ls;
    trace.push_back(dens.log_total);
    if (ls == detail::kNegInf) {
      trace.resize(steps + 1, detail::kNegInf);
      break;
    }
  }
  return trace;
}

/// P(|B_s - beta W_s| <= half_width at all grid times | W), B_0 - beta W_0 = y0.
inline double quenched_bm_confinement(std::span<const double> w_increments, double beta, double dt,
                                      std::size_t grid_points, double y0 = 0.0,
                                      ConfinementOptions opt = {}) {
  return std::exp(confinement_log_trace(w_increments, beta, dt, grid_points, y0, opt).back());
}

/// Least-squares slope of y against x.
inline double ols_slope(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

/// Slope of -ln P against t over the given horizons, read off one trace.
inline double confinement_rate(std::span<const double> trace, double dt, std::span<const double> horizons) {
  std::vector<double> ts, ys;
  for (double t : horizons) {
    const auto k = static_cast<std::size_t>(std::llround(t / dt));
    if (k >= trace.size()) throw InvalidSpec("confinement_rate: horizon beyond trace");
    ts.push_back(static_cast<double>(k) * dt);
    ys.push_back(-trace[k]);
  }
  return ols_slope(ts, ys);
}

struct GammaEstimate {
  double beta = 0.0;
  double horizon_t = 0.0;
  double dt = 0.0;
  std::size_t grid_points = 0;
  std::size_t env_replicas = 0;
  double gamma_hat = 0.0;
  std::pair<double, double> ci95{0.0, 0.0};
  std::vector<double> per_replica_values;

  double ci_half_width() const { return 0.5 * (ci95.second - ci95.first); }
};

/// Mean and Student-t 95% interval of a sample.
inline std::pair<double, std::pair<double, double>> mean_ci95(std::span<const double> v) {
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); }))
    return {v.front(), {v.front(), v.front()}};
  const auto n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double se = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  if (se == 0.0) return {mean, {mean, mean}};
  const boost::math::students_t t(n - 1.0);
  const double q = boost::math::quantile(boost::math::complement(t, 0.025));
  return {mean, {mean - q * se, mean + q * se}};
}

/// gamma(beta) from W replicas: per replica, the slope of -ln P over the
/// horizons {t/2, 3t/4, t} (removing the additive entry cost), then averaged.
inline GammaEstimate estimate_gamma(double beta, double horizon_t, double dt, std::size_t grid_points,
                                    std::size_t env_replicas, std::uint64_t seed, double y0 = 0.0) {
  if (env_replicas < 8) throw InvalidSpec("estimate_gamma: env_replicas must be >= 8");
  if (!(beta >= 0.0)) throw InvalidSpec("estimate_gamma: beta must be >= 0");
  if (!(horizon_t > 0.0) || !(dt > 0.0)) throw InvalidSpec("estimate_gamma: t and dt must be positive");
  const auto steps = static_cast<std::size_t>(std::llround(horizon_t / dt));
  if (steps < 4) throw InvalidSpec("estimate_gamma: horizon must span at least 4 steps");
  const double horizons[] = {0.5 * horizon_t, 0.75 * horizon_t, horizon_t};

  GammaEstimate est;
  est.beta = beta;
  est.horizon_t = horizon_t;
  est.dt = dt;
  est.grid_points = grid_points;
  est.env_replicas = env_replicas;
  est.per_replica_values.resize(env_replicas);

  // At beta = 0 the drift vanishes and every replica is the same run.
  const std::size_t distinct = beta == 0.0 ? 1 : env_replicas;
  parallel_for(distinct, [&](std::size_t r) {
    std::vector<double> dw(steps, 0.0);
    if (beta != 0.0) {
      CounterRng rng(derive_seed(seed, Stream::BrownianDrift, r));
      const double sd = std::sqrt(dt);
      for (double& x : dw) x = sd * rng.normal();
    }
    const auto trace = confinement_log_trace(dw, beta, dt, grid_points, y0);
    if (trace.back() == detail::kNegInf)
      throw EstimatorError("estimate_gamma: replica " + std::to_string(r) +
                           " has P = 0; increase grid_points or shorten dt");
    est.per_replica_values[r] = confinement_rate(trace, dt, horizons);
  });
  if (distinct == 1) std::fill(est.per_replica_values.begin() + 1, est.per_replica_values.end(), est.per_replica_values[0]);

  const auto [mean, ci] = mean_ci95(est.per_replica_values);
  est.gamma_hat = mean;
  est.ci95 = ci;
  if (!(est.gamma_hat > 0.0)) throw EstimatorError("estimate_gamma: non-positive estimate");
  return est;
}

/// Closed-form Brownian confinement constants.
struct ReferenceRates {
  /// gamma(0) = pi^2 / 2.
  static constexpr double gamma_zero() { return std::numbers::pi * std::numbers::pi / 2.0; }

  /// -lim ln P(Z stays in an interval of the given width) / t for a Brownian
  /// motion with variance sigma^2 t: pi^2 sigma^2 / (2 width^2).
  static double bm_tube_rate(double sigma, double width) {
    if (!(sigma > 0.0) || !(width > 0.0)) throw InvalidSpec("bm_tube_rate: sigma and width must be positive");
    return std::numbers::pi * std::numbers::pi * sigma * sigma / (2.0 * width * width);
  }
};

inline ReferenceRates reference_rates() { return {}; }

}  // namespace tubewalk
