#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "tubewalk/env.hpp"
#include "tubewalk/tube.hpp"

namespace tubewalk {

enum class Method { DpLattice, Grid, NaiveMC, Splitting, BruteForce };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::DpLattice: return "dp_lattice";
    case Method::Grid: return "grid";
    case Method::NaiveMC: return "naive_mc";
    case Method::Splitting: return "splitting";
    case Method::BruteForce: return "brute_force";
  }
  return "unknown";
}

inline bool is_stochastic(Method m) { return m == Method::NaiveMC || m == Method::Splitting; }

/// Estimate of P_mu(walk stays in the tube | S_{f(n)} = x0).
struct SurvivalEstimate {
  double p = 0.0;
  double log_p = -std::numeric_limits<double>::infinity();
  std::optional<double> stderr_log;  // stochastic methods only
  std::optional<double> stderr_p;
  Method method = Method::DpLattice;
  std::uint64_t work = 0;
  std::uint64_t seed = 0;
  bool extinct = false;
  std::optional<double> refinement_delta;  // grid only
  bool flagged = false;

  static SurvivalEstimate from_log(double log_p, Method method, std::uint64_t work) {
    SurvivalEstimate e;
    e.log_p = log_p;
    e.p = std::exp(log_p);
    e.method = method;
    e.work = work;
    return e;
  }
};

/// Shared preconditions of every survival estimator.
inline void check_survival_inputs(const EnvRealization& env, const TubeSpec& tube, double x0) {
  tube.validate();
  if (env.size() < tube.f_offset + tube.n)
    throw InvalidSpec("survival: environment shorter than f(n) + n");
  const Bounds b0 = bounds_at(tube, 0);
  if (!(x0 > b0.lower && x0 < b0.upper))
    throw InvalidSpec("survival: x0 must lie in the open tube at time 0");
}

/// ln prod_{i<n} P_mu(xi_{f+i} <= r_n); zero when no threshold is set.
inline double log_xi_factor(const EnvRealization& env, const TubeSpec& tube) {
  if (!tube.xi_threshold) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < tube.n; ++i) acc += std::log(env[tube.f_offset + i].xi_cdf(*tube.xi_threshold));
  return acc;
}

}  // namespace tubewalk
