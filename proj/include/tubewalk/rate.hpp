#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "tubewalk/env.hpp"
#include "tubewalk/gamma.hpp"
#include "tubewalk/mc.hpp"
#include "tubewalk/parallel.hpp"
#include "tubewalk/quench_dp.hpp"
#include "tubewalk/tube.hpp"

namespace tubewalk {

struct RatePoint {
  std::size_t n;
  double log_p;
};

/// OLS fit of ln p against n^{1 - 2 alpha}.
struct RateFit {
  std::vector<RatePoint> points;
  double alpha = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::pair<double, double> slope_ci95{0.0, 0.0};
};

inline RateFit decay_fit(std::span<const RatePoint> points, double alpha) {
  RateFit fit;
  fit.alpha = alpha;
  for (const auto& p : points)
    if (std::isfinite(p.log_p)) fit.points.push_back(p);
  if (fit.points.size() < 3) throw InvalidSpec("decay_fit: need at least 3 points with finite log_p");
  for (std::size_t i = 0; i < fit.points.size(); ++i)
    for (std::size_t j = i + 1; j < fit.points.size(); ++j)
      if (fit.points[i].n == fit.points[j].n) throw InvalidSpec("decay_fit: n values must be distinct");

  const double expo = 1.0 - 2.0 * alpha;
  const auto m = static_cast<double>(fit.points.size());
  std::vector<double> x, y;
  for (const auto& p : fit.points) {
    x.push_back(std::pow(static_cast<double>(p.n), expo));
    y.push_back(p.log_p);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  const double se = std::sqrt(sse / (m - 2.0) / sxx);
  if (se > 0.0) {
    const boost::math::students_t t(m - 2.0);
    const double q = boost::math::quantile(boost::math::complement(t, 0.025));
    fit.slope_ci95 = {fit.slope - q * se, fit.slope + q * se};
  } else {
    fit.slope_ci95 = {fit.slope, fit.slope};
  }
  return fit;
}

enum class EstimatorKind { Auto, DpLattice, Grid, NaiveMC, Splitting };

inline std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::Auto: return "auto";
    case EstimatorKind::DpLattice: return "dp";
    case EstimatorKind::Grid: return "grid";
    case EstimatorKind::NaiveMC: return "naive";
    case EstimatorKind::Splitting: return "splitting";
  }
  return "unknown";
}

struct EstimatorConfig {
  EstimatorKind method = EstimatorKind::Auto;
  std::size_t replicas = 10000;
  std::size_t particles = 10000;
  std::size_t checkpoints = 20;
  std::size_t grid_points = 200;
  double grid_tolerance = 1e-2;
  XiMode xi_mode = XiMode::Analytic;
};

/// Runs the configured estimator; Auto picks the exact DP for lattice atom
/// environments and grid propagation otherwise.
inline SurvivalEstimate estimate_survival(const EnvRealization& env, const TubeSpec& tube, double x0,
                                          const EstimatorConfig& cfg, std::uint64_t seed) {
  EstimatorKind kind = cfg.method;
  if (kind == EstimatorKind::Auto) {
    check_survival_inputs(env, tube, x0);
    const std::span<const StepLaw> steps(env.steps.data() + tube.f_offset, tube.n);
    kind = lattice_denominator(steps) ? EstimatorKind::DpLattice : EstimatorKind::Grid;
  }
  switch (kind) {
    case EstimatorKind::DpLattice: return survival_dp_lattice(env, tube, x0);
    case EstimatorKind::Grid: return survival_grid(env, tube, x0, cfg.grid_points, cfg.grid_tolerance);
    case EstimatorKind::NaiveMC: return survival_naive_mc(env, tube, x0, cfg.replicas, seed, cfg.xi_mode);
    case EstimatorKind::Splitting:
      return survival_splitting(env, tube, x0, cfg.particles, cfg.checkpoints, seed, cfg.xi_mode);
    case EstimatorKind::Auto: break;
  }
  throw InvalidSpec("estimate_survival: unresolved estimator");
}

/// f(n) = max(1, floor(c * n^kappa)); power functions satisfy the growth
/// condition on the entrance time for every c, kappa >= 0.
struct OffsetRule {
  double c = 1.0;
  double kappa = 0.5;

  std::size_t operator()(std::size_t n) const {
    const double v = std::floor(c * std::pow(static_cast<double>(n), kappa));
    return std::max<std::size_t>(1, static_cast<std::size_t>(v));
  }
};

struct GammaSource {
  enum class Kind { Reference, Estimate };
  Kind kind = Kind::Reference;
  double t = 8.0;
  double dt = 1e-3;
  std::size_t grid_points = 400;
  std::size_t replicas = 8;
};

struct CheckConfig {
  EnvironmentSpec env;
  TubeSpec tube;  // template: n and f_offset are substituted per run
  std::vector<std::size_t> n_list;
  OffsetRule offset;
  EstimatorConfig estimator;
  GammaSource gamma;
  std::optional<double> x0;  // in units of n^alpha; default (g(0) + h(0)) / 2
  bool sweep_start = false;  // take the minimum over 11 points of the start window
  bool shared_environment = false;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> env_seed;  // master for realizations; defaults to seed
  double tolerance = 0.2;
};

struct CheckRow {
  std::size_t n = 0;
  std::size_t f_offset = 0;
  double scaled_n = 0.0;  // n^{1 - 2 alpha}
  double x0 = 0.0;
  std::uint64_t env_seed = 0;
  SurvivalEstimate estimate;
};

struct CheckReport {
  std::vector<CheckRow> rows;
  RateFit fit;
  double c_gh = 0.0;
  Moments moments{};
  double beta = 0.0;
  double gamma_value = 0.0;
  std::optional<GammaEstimate> gamma_estimate;
  double predicted = 0.0;
  double discrepancy = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline std::uint64_t realization_seed(const CheckConfig& cfg, std::size_t n) {
  return derive_seed(cfg.env_seed.value_or(cfg.seed), Stream::RealizationSeed, cfg.shared_environment ? 0 : n);
}

inline double gamma_for(const CheckConfig& cfg, double beta, std::optional<GammaEstimate>& out) {
  if (cfg.gamma.kind == GammaSource::Kind::Reference) {
    if (beta != 0.0)
      throw InvalidSpec("theorem_check: reference gamma is only known at beta = 0; use the estimate source");
    return ReferenceRates::gamma_zero();
  }
  out = estimate_gamma(beta, cfg.gamma.t, cfg.gamma.dt, cfg.gamma.grid_points, cfg.gamma.replicas,
                       derive_seed(cfg.seed, Stream::BrownianDrift, 0, 1));
  return out->gamma_hat;
}

/// One n of a check: samples the realization and estimates ln P, taking the
/// minimum over the start sweep when enabled.
inline CheckRow check_row(const CheckConfig& cfg, std::size_t n, const EstimatorConfig& est) {
  CheckRow row;
  row.n = n;
  row.f_offset = cfg.offset(n);
  const TubeSpec tube = cfg.tube.with_n(n, row.f_offset);
  tube.validate();
  row.scaled_n = std::pow(static_cast<double>(n), 1.0 - 2.0 * tube.alpha);
  row.env_seed = realization_seed(cfg, n);
  const EnvRealization env = sample_environment(cfg.env, row.f_offset + n, row.env_seed);
  const std::uint64_t mc_seed = derive_seed(cfg.seed, Stream::Walk, n, 0x5eed);
  std::vector<double> starts;
  if (cfg.sweep_start) {
    starts = start_sweep(tube);
  } else {
    const double mid = cfg.x0 ? *cfg.x0 : 0.5 * (tube.g(0.0) + tube.h(0.0));
    starts = {mid * tube.scale()};
  }
  bool first = true;
  for (double x0 : starts) {
    SurvivalEstimate e = estimate_survival(env, tube, x0, est, mc_seed);
    if (first || e.log_p < row.estimate.log_p) {
      row.estimate = e;
      row.x0 = x0;
    }
    first = false;
  }
  return row;
}

/// Samples one environment per n (or one shared realization), estimates
/// ln P for each n, fits the decay constant and compares it with
/// -C_{g,h} sigma_Q^2 gamma(sigma_A / sigma_Q).
inline CheckReport theorem_check(const CheckConfig& cfg) {
  if (cfg.n_list.size() < 3) throw InvalidSpec("theorem_check: need at least 3 values of n");
  cfg.env.validate();
  CheckReport rep;
  rep.tolerance = cfg.tolerance;
  rep.rows.resize(cfg.n_list.size());

  parallel_for(cfg.n_list.size(), [&](std::size_t idx) {
    const std::size_t n = cfg.n_list[idx];
    try {
      rep.rows[idx] = check_row(cfg, n, cfg.estimator);
    } catch (const std::exception& e) {
      throw EstimatorError("theorem_check: n=" + std::to_string(n) + ": " + e.what());
    }
  });

  std::vector<RatePoint> pts;
  for (const auto& r : rep.rows) pts.push_back({r.n, r.estimate.log_p});
  rep.fit = decay_fit(pts, cfg.tube.alpha);
  rep.moments = moments(cfg.env);
  rep.beta = std::sqrt(rep.moments.sigma_a_sq / rep.moments.sigma_q_sq);
  rep.gamma_value = gamma_for(cfg, rep.beta, rep.gamma_estimate);
  rep.c_gh = c_gh(cfg.tube.with_n(cfg.n_list.front(), 1));
  rep.predicted = predicted_rate(cfg.tube.with_n(cfg.n_list.front(), 1), rep.moments.sigma_a_sq,
                                 rep.moments.sigma_q_sq, rep.gamma_value);
  rep.discrepancy = std::abs(rep.fit.slope - rep.predicted) / std::abs(rep.predicted);
  rep.pass = rep.discrepancy <= cfg.tolerance;
  return rep;
}

}  // namespace tubewalk
