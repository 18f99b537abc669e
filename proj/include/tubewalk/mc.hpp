#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "tubewalk/env.hpp"
#include "tubewalk/parallel.hpp"
#include "tubewalk/rng.hpp"
#include "tubewalk/survival.hpp"
#include "tubewalk/tube.hpp"

namespace tubewalk {

/// How the auxiliary constraint xi_i <= r_n enters the Monte Carlo estimators:
/// as the exact factor prod P_mu(xi_i <= r_n), or sampled inside each path.
enum class XiMode { Analytic, Sampled };

namespace detail {

struct PathCursor {
  double x;
  bool alive = true;
};

/// Advances one path over steps [from, to). The walk and xi draws use separate
/// streams so that the walk draws do not depend on the tube or on xi.
class PathStepper {
 public:
  PathStepper(const EnvRealization& env, const TubeSpec& tube, XiMode xi_mode)
      : env_(env), tube_(tube), sample_xi_(xi_mode == XiMode::Sampled && tube.xi_threshold) {
    bounds_.reserve(tube.n + 1);
    for (std::size_t i = 0; i <= tube.n; ++i) bounds_.push_back(slice_bounds(tube, i));
  }

  /// Returns the number of steps actually taken.
  std::size_t advance(PathCursor& c, std::size_t from, std::size_t to, std::uint64_t walk_key,
                      std::uint64_t xi_key) const {
    CounterRng rng(walk_key);
    CounterRng xi_rng(xi_key);
    std::size_t taken = 0;
    for (std::size_t i = from; i < to && c.alive; ++i) {
      const StepLaw& law = env_[tube_.f_offset + i];
      c.x += law.sample(rng);
      ++taken;
      if (sample_xi_ && law.sample_xi(xi_rng) > *tube_.xi_threshold) c.alive = false;
      if (!bounds_[i + 1].contains(c.x)) c.alive = false;
    }
    return taken;
  }

  /// ln of the analytic xi factor, or 0 when xi is sampled or absent.
  double analytic_log_factor() const { return sample_xi_ ? 0.0 : log_xi_factor(env_, tube_); }

 private:
  const EnvRealization& env_;
  const TubeSpec& tube_;
  bool sample_xi_;
  std::vector<Bounds> bounds_;
};

inline constexpr std::size_t kChunk = 256;

template <class Body>
void for_chunks(std::size_t count, Body&& body) {
  const std::size_t chunks = (count + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * kChunk;
    const std::size_t hi = std::min(count, lo + kChunk);
    body(lo, hi);
  });
}

/// Stream keys shared by both estimators: naive replica r is block 0, particle r.
inline std::uint64_t walk_key(std::uint64_t seed, std::size_t block, std::size_t particle) {
  return derive_seed(seed, Stream::Walk, block, particle);
}
inline std::uint64_t xi_key(std::uint64_t seed, std::size_t block, std::size_t particle) {
  return derive_seed(seed, Stream::Xi, block, particle);
}

}  // namespace detail

/// Fraction of independent replica paths that survive the whole tube.
inline SurvivalEstimate survival_naive_mc(const EnvRealization& env, const TubeSpec& tube,
                                          double x0, std::size_t replicas, std::uint64_t seed,
                                          XiMode xi_mode = XiMode::Analytic) {
  check_survival_inputs(env, tube, x0);
  if (replicas < 100) throw InvalidSpec("survival_naive_mc: replicas must be >= 100");
  const detail::PathStepper stepper(env, tube, xi_mode);

  std::vector<unsigned char> alive(replicas);
  std::vector<std::uint64_t> steps(replicas);
  detail::for_chunks(replicas, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      detail::PathCursor c{x0};
      steps[r] = stepper.advance(c, 0, tube.n, detail::walk_key(seed, 0, r), detail::xi_key(seed, 0, r));
      alive[r] = c.alive;
    }
  });

  std::uint64_t survivors = 0, work = 0;
  for (std::size_t r = 0; r < replicas; ++r) {
    survivors += alive[r];
    work += steps[r];
  }
  const double n = static_cast<double>(replicas);
  const double frac = static_cast<double>(survivors) / n;
  const double log_factor = stepper.analytic_log_factor();

  SurvivalEstimate est;
  est.method = Method::NaiveMC;
  est.seed = seed;
  est.work = work;
  est.log_p = (survivors == 0 ? -std::numeric_limits<double>::infinity() : std::log(frac)) + log_factor;
  est.p = std::exp(est.log_p);
  est.stderr_p = std::sqrt(frac * (1.0 - frac) / n) * std::exp(log_factor);
  est.stderr_log = survivors == 0 ? std::numeric_limits<double>::infinity()
                                  : std::sqrt((1.0 - frac) / (n * frac));
  return est;
}

/// Fixed-population multilevel splitting along the time axis. The n steps are
/// cut into blocks of ceil(n / checkpoints) steps (the last block may be
/// shorter). After each block the survivors are resampled multinomially back
/// to `particles`; ln p is the sum of ln(surviving fraction) over blocks and
/// stderr_log the delta-method sum of (1 - phi) / (N phi).
inline SurvivalEstimate survival_splitting(const EnvRealization& env, const TubeSpec& tube,
                                           double x0, std::size_t particles,
                                           std::size_t checkpoints, std::uint64_t seed,
                                           XiMode xi_mode = XiMode::Analytic) {
  check_survival_inputs(env, tube, x0);
  if (particles < 100) throw InvalidSpec("survival_splitting: particles must be >= 100");
  if (checkpoints < 1) throw InvalidSpec("survival_splitting: checkpoints must be >= 1");
  const detail::PathStepper stepper(env, tube, xi_mode);
  const std::size_t block = (tube.n + checkpoints - 1) / checkpoints;
  const std::size_t blocks = (tube.n + block - 1) / block;

  std::vector<detail::PathCursor> pop(particles, detail::PathCursor{x0});
  std::vector<std::uint64_t> steps(particles);
  std::vector<double> survivors;
  survivors.reserve(particles);
  const double n = static_cast<double>(particles);
  double log_p = 0.0, var_log = 0.0;
  std::uint64_t work = 0;

  SurvivalEstimate est;
  est.method = Method::Splitting;
  est.seed = seed;

  for (std::size_t k = 0; k < blocks; ++k) {
    const std::size_t from = k * block;
    const std::size_t to = std::min(tube.n, from + block);
    detail::for_chunks(particles, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t j = lo; j < hi; ++j)
        steps[j] = stepper.advance(pop[j], from, to, detail::walk_key(seed, k, j), detail::xi_key(seed, k, j));
    });
    survivors.clear();
    for (std::size_t j = 0; j < particles; ++j) {
      work += steps[j];
      if (pop[j].alive) survivors.push_back(pop[j].x);
    }
    if (survivors.empty()) {
      est.extinct = true;
      est.work = work;
      est.p = 0.0;
      est.log_p = -std::numeric_limits<double>::infinity();
      est.stderr_log = std::numeric_limits<double>::infinity();
      est.stderr_p = 0.0;
      return est;
    }
    const double phi = static_cast<double>(survivors.size()) / n;
    log_p += std::log(phi);
    var_log += (1.0 - phi) / (n * phi);
    if (k + 1 < blocks) {
      CounterRng rng(derive_seed(seed, Stream::Resample, k));
      for (auto& c : pop) c = detail::PathCursor{survivors[rng.below(survivors.size())]};
    }
  }

  est.work = work;
  est.log_p = log_p + stepper.analytic_log_factor();
  est.p = std::exp(est.log_p);
  est.stderr_log = std::sqrt(var_log);
  est.stderr_p = est.p * *est.stderr_log;
  return est;
}

}  // namespace tubewalk
