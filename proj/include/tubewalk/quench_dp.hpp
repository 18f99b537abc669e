#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tubewalk/env.hpp"
#include "tubewalk/survival.hpp"
#include "tubewalk/tube.hpp"

namespace tubewalk {

/// Discretized sub-probability measure of the surviving walk at one time
/// slice. Mass is kept renormalized; log_total carries the survival so far.
struct SubDensity {
  std::vector<double> grid;
  std::vector<double> mass;
  double log_total = 0.0;

  double total() const { return std::exp(log_total); }
};

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

/// Renormalizes `mass` to unit sum and returns ln of the old sum (-inf if zero).
inline double renormalize(std::vector<double>& mass) {
  double s = 0.0;
  for (double m : mass) s += m;
  if (!(s > 0.0)) return kNegInf;
  const double inv = 1.0 / s;
  for (double& m : mass) m *= inv;
  return std::log(s);
}

struct LatticeRange {
  long lo;
  long hi;
  bool empty() const { return lo > hi; }
};

/// Indices k with x0 + k * spacing inside `b`.
inline LatticeRange lattice_range(const Bounds& b, double x0, double spacing) {
  return {static_cast<long>(std::ceil((b.lower_tol() - x0) / spacing)),
          static_cast<long>(std::floor((b.upper_tol() - x0) / spacing))};
}

}  // namespace detail

/// Exact quenched survival for atom laws on a common lattice (1/q)Z.
/// Returns ln P after each step (entry 0 is ln 1 = 0), xi factor excluded.
inline std::vector<double> dp_lattice_log_totals(const EnvRealization& env, const TubeSpec& tube,
                                                 double x0, std::uint64_t* work = nullptr) {
  check_survival_inputs(env, tube, x0);
  const std::span<const StepLaw> steps(env.steps.data() + tube.f_offset, tube.n);
  const auto q = lattice_denominator(steps);
  if (!q)
    throw EstimatorError(
        "survival_dp_lattice: step laws are not atoms on a common lattice; use survival_grid");
  const double spacing = 1.0 / *q;

  std::vector<detail::LatticeRange> ranges(tube.n + 1);
  long k_lo = 0, k_hi = 0;
  for (std::size_t i = 0; i <= tube.n; ++i) {
    ranges[i] = i == 0 ? detail::LatticeRange{0, 0}
                       : detail::lattice_range(slice_bounds(tube, i), x0, spacing);
    k_lo = std::min(k_lo, ranges[i].lo);
    k_hi = std::max(k_hi, ranges[i].hi);
  }

  const auto width = static_cast<std::size_t>(k_hi - k_lo + 1);
  std::vector<double> cur(width, 0.0), next(width, 0.0);
  cur[static_cast<std::size_t>(-k_lo)] = 1.0;
  std::vector<double> log_totals{0.0};
  log_totals.reserve(tube.n + 1);
  double log_acc = 0.0;
  std::uint64_t updates = 0;
  std::vector<std::pair<long, double>> shifts;

  for (std::size_t i = 0; i < tube.n; ++i) {
    const auto& law = steps[i];
    shifts.clear();
    for (const auto& a : law.atoms)
      if (a.weight > 0.0) shifts.emplace_back(std::lround(a.position * *q), a.weight);

    const auto src = ranges[i];
    const auto dst = ranges[i + 1];
    std::fill(next.begin(), next.end(), 0.0);
    if (!dst.empty()) {
      for (long k = src.lo; k <= src.hi; ++k) {
        const double m = cur[static_cast<std::size_t>(k - k_lo)];
        if (m == 0.0) continue;
        for (const auto& [shift, w] : shifts) {
          const long t = k + shift;
          if (t < dst.lo || t > dst.hi) continue;
          next[static_cast<std::size_t>(t - k_lo)] += w * m;
          ++updates;
        }
      }
    }
    std::swap(cur, next);
    const double ls = detail::renormalize(cur);
    log_acc += ls;
    log_totals.push_back(log_acc);
    if (ls == detail::kNegInf) {
      log_totals.resize(tube.n + 1, detail::kNegInf);
      break;
    }
  }
  if (work) *work = updates;
  return log_totals;
}

inline SurvivalEstimate survival_dp_lattice(const EnvRealization& env, const TubeSpec& tube,
                                            double x0) {
  std::uint64_t work = 0;
  const auto totals = dp_lattice_log_totals(env, tube, x0, &work);
  return SurvivalEstimate::from_log(totals.back() + log_xi_factor(env, tube), Method::DpLattice,
                                    work);
}

namespace detail {

/// One sub-density propagation of the whole tube on a grid of `grid_points`.
/// Gaussian steps: bins spanning each slice, transition mass from Gaussian CDF
/// differences at bin edges, mass placed at bin centers. Atom steps: a grid
/// anchored at x0 (aligned to the atoms' lattice when one exists) with exact
/// shifts, or linear mass splitting for off-grid atoms.
inline std::vector<double> grid_log_totals(const EnvRealization& env, const TubeSpec& tube,
                                           double x0, std::size_t grid_points) {
  const std::span<const StepLaw> steps(env.steps.data() + tube.f_offset, tube.n);
  const bool all_gaussian = std::all_of(steps.begin(), steps.end(), [](const StepLaw& s) {
    return s.kind == StepLaw::Kind::Gaussian;
  });
  const bool all_atoms = std::all_of(steps.begin(), steps.end(), [](const StepLaw& s) {
    return s.kind == StepLaw::Kind::Atoms;
  });
  if (!all_gaussian && !all_atoms)
    throw EstimatorError("survival_grid: mixed Gaussian and atom step laws are not supported");

  std::vector<double> log_totals{0.0};
  log_totals.reserve(tube.n + 1);
  double log_acc = 0.0;
  const auto fail_rest = [&] { log_totals.resize(tube.n + 1, kNegInf); };
  const auto G = grid_points;

  if (all_gaussian) {
    std::vector<double> xs{x0}, mass{1.0};
    double src_lower = 0.0, src_h = 0.0;
    bool src_uniform = false;
    std::vector<double> next(G), cdf;
    for (std::size_t i = 0; i < tube.n; ++i) {
      const auto& law = steps[i];
      const double mu = law.gaussian_mean, sigma = law.gaussian_std;
      const Bounds b = slice_bounds(tube, i + 1);
      const double lower = b.lower_tol(), upper = b.upper_tol();
      if (!(upper > lower)) {
        fail_rest();
        break;
      }
      const double h = (upper - lower) / static_cast<double>(G);
      std::fill(next.begin(), next.end(), 0.0);

      if (src_uniform && std::abs(h - src_h) <= 1e-12 * h) {
        // Equal spacing: transition mass depends only on k - j.
        const auto S = static_cast<long>(xs.size());
        const auto T = static_cast<long>(G);
        const double c = lower - src_lower - mu;
        cdf.assign(static_cast<std::size_t>(S + T + 1), 0.0);
        for (long d = -S + 1; d <= T + 1; ++d)
          cdf[static_cast<std::size_t>(d + S - 1)] =
              std_normal_cdf((c + (static_cast<double>(d) - 0.5) * h) / sigma);
        for (long k = 0; k < T; ++k) {
          double acc = 0.0;
          for (long j = 0; j < S; ++j) {
            const auto d = static_cast<std::size_t>(k - j + S - 1);
            acc += mass[static_cast<std::size_t>(j)] * (cdf[d + 1] - cdf[d]);
          }
          next[static_cast<std::size_t>(k)] = acc;
        }
      } else {
        cdf.resize(G + 1);
        for (std::size_t j = 0; j < xs.size(); ++j) {
          if (mass[j] == 0.0) continue;
          // Only edges within 10 sigma carry mass above rounding.
          const double centre = xs[j] + mu;
          const long k0 = std::max(0L, static_cast<long>(std::floor((centre - 10.0 * sigma - lower) / h)));
          const long k1 = std::min(static_cast<long>(G), static_cast<long>(std::ceil((centre + 10.0 * sigma - lower) / h)));
          if (k0 >= k1) continue;
          for (long k = k0; k <= k1; ++k)
            cdf[static_cast<std::size_t>(k)] = std_normal_cdf((lower + static_cast<double>(k) * h - centre) / sigma);
          for (long k = k0; k < k1; ++k)
            next[static_cast<std::size_t>(k)] += mass[j] * (cdf[static_cast<std::size_t>(k + 1)] - cdf[static_cast<std::size_t>(k)]);
        }
      }

      xs.resize(G);
      for (std::size_t k = 0; k < G; ++k) xs[k] = lower + (static_cast<double>(k) + 0.5) * h;
      mass = next;
      src_lower = lower;
      src_h = h;
      src_uniform = true;
      const double ls = renormalize(mass);
      log_acc += ls;
      log_totals.push_back(log_acc);
      if (ls == kNegInf) {
        fail_rest();
        break;
      }
    }
    return log_totals;
  }

  double max_width = 0.0;
  for (std::size_t i = 0; i <= tube.n; ++i) max_width = std::max(max_width, bounds_at(tube, i).width());
  double spacing = max_width / static_cast<double>(G);
  if (const auto q = lattice_denominator(steps)) {
    const double k = std::max(1.0, std::ceil(1.0 / (*q * spacing)));
    spacing = 1.0 / (*q * k);
  }

  LatticeRange src{0, 0};
  std::vector<double> mass{1.0}, next;
  for (std::size_t i = 0; i < tube.n; ++i) {
    const Bounds b = slice_bounds(tube, i + 1);
    const LatticeRange dst = lattice_range(b, x0, spacing);
    if (dst.empty()) {
      fail_rest();
      break;
    }
    next.assign(static_cast<std::size_t>(dst.hi - dst.lo + 1), 0.0);
    const auto deposit = [&](long t, double m) {
      t = std::clamp(t, dst.lo, dst.hi);
      next[static_cast<std::size_t>(t - dst.lo)] += m;
    };
    for (const auto& a : steps[i].atoms) {
      if (a.weight == 0.0) continue;
      const double shift = a.position / spacing;
      const double whole = std::round(shift);
      const bool aligned = std::abs(shift - whole) <= 1e-9;
      for (long j = src.lo; j <= src.hi; ++j) {
        const double m = mass[static_cast<std::size_t>(j - src.lo)] * a.weight;
        if (m == 0.0) continue;
        if (aligned) {
          const long t = j + static_cast<long>(whole);
          if (t >= dst.lo && t <= dst.hi) next[static_cast<std::size_t>(t - dst.lo)] += m;
          continue;
        }
        const double y = x0 + static_cast<double>(j) * spacing + a.position;
        if (!b.contains(y)) continue;
        const double u = (y - x0) / spacing;
        const double base = std::floor(u);
        const double frac = u - base;
        deposit(static_cast<long>(base), m * (1.0 - frac));
        deposit(static_cast<long>(base) + 1, m * frac);
      }
    }
    mass.swap(next);
    src = dst;
    const double ls = renormalize(mass);
    log_acc += ls;
    log_totals.push_back(log_acc);
    if (ls == kNegInf) {
      fail_rest();
      break;
    }
  }
  return log_totals;
}

}  // namespace detail

/// Grid density-propagation estimate. refinement_delta is |ln p(G) - ln p(G/2)|
/// (0 when both are zero); the estimate is flagged when it exceeds `tolerance`.
inline SurvivalEstimate survival_grid(const EnvRealization& env, const TubeSpec& tube, double x0,
                                      std::size_t grid_points, double tolerance = 1e-2) {
  check_survival_inputs(env, tube, x0);
  if (grid_points < 50) throw InvalidSpec("survival_grid: grid_points must be >= 50");
  const double xi = log_xi_factor(env, tube);
  const double fine = detail::grid_log_totals(env, tube, x0, grid_points).back();
  const double coarse = detail::grid_log_totals(env, tube, x0, grid_points / 2).back();
  auto est = SurvivalEstimate::from_log(fine + xi, Method::Grid,
                                        static_cast<std::uint64_t>(tube.n) * grid_points * grid_points);
  if (fine == detail::kNegInf && coarse == detail::kNegInf)
    est.refinement_delta = 0.0;
  else
    est.refinement_delta = std::abs(fine - coarse);
  est.flagged = !(*est.refinement_delta <= tolerance);
  return est;
}

/// Grid ln-survival after every step (xi factor excluded).
inline std::vector<double> grid_log_totals(const EnvRealization& env, const TubeSpec& tube, double x0,
                                           std::size_t grid_points) {
  check_survival_inputs(env, tube, x0);
  if (grid_points < 50) throw InvalidSpec("survival_grid: grid_points must be >= 50");
  return detail::grid_log_totals(env, tube, x0, grid_points);
}

/// `count` evenly spaced starting points across start_window * n^alpha, used
/// to approximate the infimum over starting positions.
inline std::vector<double> start_sweep(const TubeSpec& tube, std::size_t count = 11) {
  if (!tube.start_window) throw InvalidSpec("start_sweep: tube has no start window");
  if (count < 1) throw InvalidSpec("start_sweep: count must be >= 1");
  const double sc = tube.scale();
  const double a = tube.start_window->lo * sc, b = tube.start_window->hi * sc;
  std::vector<double> xs;
  if (count == 1) return {0.5 * (a + b)};
  for (std::size_t k = 0; k < count; ++k)
    xs.push_back(a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1));
  return xs;
}

}  // namespace tubewalk
