#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tubewalk/error.hpp"
#include "tubewalk/rng.hpp"

namespace tubewalk {

struct Atom {
  double position;
  double weight;
};

/// Law of a single increment X_i given the environment. Built through the
/// factories, which fill the quenched moments from the analytic formulas.
struct StepLaw {
  enum class Kind { Atoms, Gaussian };

  Kind kind = Kind::Atoms;
  std::vector<Atom> atoms;
  double gaussian_mean = 0.0;
  double gaussian_std = 0.0;
  double quenched_mean = 0.0;
  double quenched_var = 0.0;
  // xi_i given mu_i is xi_scale * Exp(1), independent of X_i.
  double xi_scale = 1.0;

  static StepLaw from_atoms(std::vector<Atom> atoms, double xi_scale = 1.0) {
    if (atoms.empty()) throw InvalidSpec("step law: empty atom list");
    double total = 0.0;
    for (const auto& a : atoms) {
      if (!std::isfinite(a.position) || !(a.weight >= 0.0))
        throw InvalidSpec("step law: atom weights must be nonnegative");
      total += a.weight;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw InvalidSpec("step law: atom weights must sum to 1");
    StepLaw law;
    law.kind = Kind::Atoms;
    law.xi_scale = check_xi(xi_scale);
    double mean = 0.0;
    for (const auto& a : atoms) mean += a.weight * a.position;
    double var = 0.0;
    for (const auto& a : atoms) var += a.weight * (a.position - mean) * (a.position - mean);
    law.atoms = std::move(atoms);
    law.quenched_mean = mean;
    law.quenched_var = var;
    return law;
  }

  static StepLaw gaussian(double mean, double std_dev, double xi_scale = 1.0) {
    if (!(std_dev > 0.0) || !std::isfinite(std_dev) || !std::isfinite(mean))
      throw InvalidSpec("step law: Gaussian std must be positive");
    StepLaw law;
    law.kind = Kind::Gaussian;
    law.gaussian_mean = mean;
    law.gaussian_std = std_dev;
    law.quenched_mean = mean;
    law.quenched_var = std_dev * std_dev;
    law.xi_scale = check_xi(xi_scale);
    return law;
  }

  double sample(CounterRng& rng) const {
    if (kind == Kind::Gaussian) return gaussian_mean + gaussian_std * rng.normal();
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& a : atoms) {
      acc += a.weight;
      if (u < acc) return a.position;
    }
    return atoms.back().position;
  }

  /// P_mu(xi_i <= r).
  double xi_cdf(double r) const {
    return r <= 0.0 ? 0.0 : -std::expm1(-r / xi_scale);
  }

  double sample_xi(CounterRng& rng) const { return xi_scale * rng.exponential(); }

 private:
  static double check_xi(double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidSpec("step law: xi_scale must be positive");
    return s;
  }
};

enum class Family { Degenerate, RandomShiftBernoulli, RandomMeanGaussian };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::Degenerate: return "degenerate";
    case Family::RandomShiftBernoulli: return "random_shift_bernoulli";
    case Family::RandomMeanGaussian: return "random_mean_gaussian";
  }
  return "unknown";
}

inline Family family_from_string(const std::string& s) {
  if (s == "degenerate") return Family::Degenerate;
  if (s == "random_shift_bernoulli") return Family::RandomShiftBernoulli;
  if (s == "random_mean_gaussian") return Family::RandomMeanGaussian;
  throw InvalidSpec("environment.family: unknown family '" + s + "'");
}

/// Meta-law of the i.i.d. per-step measures.
///
///  - Degenerate: every step has the same atom law (must be centered).
///  - RandomShiftBernoulli: X = eps + m, eps Rademacher, m = +-shift with
///    probability 1/2 each; shift = p / lattice_q for an integer p.
///  - RandomMeanGaussian: X ~ N(m, tau^2) with m ~ N(0, sigma_a^2).
struct EnvironmentSpec {
  Family family = Family::Degenerate;
  std::vector<Atom> atoms;
  double shift = 0.0;
  int lattice_q = 1;
  double sigma_a = 0.0;
  double tau = 1.0;
  double xi_scale = 1.0;

  static EnvironmentSpec degenerate(std::vector<Atom> atoms) {
    EnvironmentSpec s;
    s.family = Family::Degenerate;
    s.atoms = std::move(atoms);
    return s;
  }
  static EnvironmentSpec rademacher() { return degenerate({{-1.0, 0.5}, {1.0, 0.5}}); }
  static EnvironmentSpec random_shift_bernoulli(double shift, int lattice_q) {
    EnvironmentSpec s;
    s.family = Family::RandomShiftBernoulli;
    s.shift = shift;
    s.lattice_q = lattice_q;
    return s;
  }
  static EnvironmentSpec random_mean_gaussian(double sigma_a, double tau) {
    EnvironmentSpec s;
    s.family = Family::RandomMeanGaussian;
    s.sigma_a = sigma_a;
    s.tau = tau;
    return s;
  }

  void validate() const {
    if (!(xi_scale > 0.0)) throw InvalidSpec("environment: xi_scale must be positive");
    switch (family) {
      case Family::Degenerate: {
        const StepLaw law = StepLaw::from_atoms(atoms, xi_scale);
        if (std::abs(law.quenched_mean) > 1e-12)
          throw InvalidSpec("environment: degenerate atoms must have mean 0 (E M_1 = 0)");
        if (!(law.quenched_var > 0.0))
          throw InvalidSpec("environment: degenerate atoms must have positive variance (sigma_Q^2 > 0)");
        break;
      }
      case Family::RandomShiftBernoulli: {
        if (!(shift >= 0.0) || !std::isfinite(shift))
          throw InvalidSpec("environment: shift must be >= 0");
        if (lattice_q < 1) throw InvalidSpec("environment: lattice_q must be a positive integer");
        const double p = shift * lattice_q;
        if (std::abs(p - std::round(p)) > 1e-9)
          throw InvalidSpec("environment: shift must lie on the lattice (1/lattice_q)Z");
        break;
      }
      case Family::RandomMeanGaussian:
        if (!(sigma_a >= 0.0) || !std::isfinite(sigma_a))
          throw InvalidSpec("environment: sigma_a must be >= 0");
        if (!(tau > 0.0) || !std::isfinite(tau))
          throw InvalidSpec("environment: tau must be positive (sigma_Q^2 > 0)");
        break;
    }
  }

  std::string id() const {
    std::ostringstream os;
    os.precision(17);
    os << to_string(family);
    switch (family) {
      case Family::Degenerate:
        os << '[';
        for (std::size_t i = 0; i < atoms.size(); ++i)
          os << (i ? "," : "") << atoms[i].position << ':' << atoms[i].weight;
        os << ']';
        break;
      case Family::RandomShiftBernoulli: os << "(d=" << shift << ",q=" << lattice_q << ')'; break;
      case Family::RandomMeanGaussian: os << "(sigma_a=" << sigma_a << ",tau=" << tau << ')'; break;
    }
    return os.str();
  }
};

struct Moments {
  double sigma_a_sq;
  double sigma_q_sq;
};

inline Moments moments(const EnvironmentSpec& spec) {
  spec.validate();
  switch (spec.family) {
    case Family::Degenerate:
      return {0.0, StepLaw::from_atoms(spec.atoms).quenched_var};
    case Family::RandomShiftBernoulli:
      return {spec.shift * spec.shift, 1.0};
    case Family::RandomMeanGaussian:
      return {spec.sigma_a * spec.sigma_a, spec.tau * spec.tau};
  }
  return {0.0, 0.0};
}

/// One sampled environment. steps[k] is the law of X_{k+1}.
struct EnvRealization {
  std::vector<StepLaw> steps;
  std::uint64_t seed = 0;
  std::string spec_id;

  std::size_t size() const noexcept { return steps.size(); }
  const StepLaw& operator[](std::size_t k) const { return steps[k]; }
};

/// Draws step k from its own counter-derived stream, so a realization of
/// length L is a prefix of every longer realization with the same seed.
inline StepLaw sample_step_law(const EnvironmentSpec& spec, std::uint64_t seed, std::size_t k) {
  CounterRng rng(derive_seed(seed, Stream::Environment, k));
  switch (spec.family) {
    case Family::Degenerate:
      return StepLaw::from_atoms(spec.atoms, spec.xi_scale);
    case Family::RandomShiftBernoulli: {
      const double m = rng.uniform() < 0.5 ? -spec.shift : spec.shift;
      return StepLaw::from_atoms({{m - 1.0, 0.5}, {m + 1.0, 0.5}}, spec.xi_scale);
    }
    case Family::RandomMeanGaussian:
      return StepLaw::gaussian(spec.sigma_a * rng.normal(), spec.tau, spec.xi_scale);
  }
  throw InvalidSpec("environment: unknown family");
}

inline EnvRealization sample_environment(const EnvironmentSpec& spec, std::size_t length,
                                         std::uint64_t seed) {
  spec.validate();
  if (length < 1) throw InvalidSpec("sample_environment: length must be >= 1");
  EnvRealization env;
  env.seed = seed;
  env.spec_id = spec.id();
  env.steps.reserve(length);
  for (std::size_t k = 0; k < length; ++k) env.steps.push_back(sample_step_law(spec, seed, k));
  return env;
}

/// Smallest q <= max_q with every atom of every listed step on (1/q)Z, or
/// nullopt when some step is Gaussian or no such q exists.
inline std::optional<int> lattice_denominator(std::span<const StepLaw> steps, int max_q = 1024) {
  for (const auto& s : steps)
    if (s.kind != StepLaw::Kind::Atoms) return std::nullopt;
  for (int q = 1; q <= max_q; ++q) {
    bool ok = true;
    for (const auto& s : steps) {
      for (const auto& a : s.atoms) {
        const double v = a.position * q;
        if (std::abs(v - std::round(v)) > 1e-9) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
    if (ok) return q;
  }
  return std::nullopt;
}

struct AssumptionReport {
  bool h1 = false;
  bool h2 = false;
  bool h3 = false;
  double mean_m1 = 0.0;
  double sigma_a_sq = 0.0;
  double sigma_q_sq = 0.0;
  // Witnesses: E exp(lambda1 |M_1|) = h2_bound; E_mu exp(lambda2 |U_1|) <= lambda3 a.s.
  double lambda1 = 1.0;
  double h2_bound = 0.0;
  double lambda2 = 1.0;
  double lambda3 = 0.0;
  std::vector<std::string> notes;

  bool all_pass() const { return h1 && h2 && h3; }
};

inline AssumptionReport verify_assumptions(const EnvironmentSpec& spec) {
  AssumptionReport r;
  try {
    spec.validate();
  } catch (const InvalidSpec& e) {
    r.notes.emplace_back(e.what());
    return r;
  }
  const auto std_normal_cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  // E exp(l |Z|) for Z ~ N(0, s^2).
  const auto abs_gauss_mgf = [&](double l, double s) {
    return 2.0 * std::exp(0.5 * l * l * s * s) * std_normal_cdf(l * s);
  };

  const Moments mom = moments(spec);
  r.sigma_a_sq = mom.sigma_a_sq;
  r.sigma_q_sq = mom.sigma_q_sq;
  switch (spec.family) {
    case Family::Degenerate: {
      const StepLaw law = StepLaw::from_atoms(spec.atoms);
      r.mean_m1 = law.quenched_mean;
      double bound = 0.0;
      for (const auto& a : law.atoms) bound = std::max(bound, std::abs(a.position - law.quenched_mean));
      r.h2_bound = std::exp(r.lambda1 * std::abs(law.quenched_mean));
      r.lambda3 = std::exp(r.lambda2 * bound);
      r.notes.emplace_back("bounded support: |U_1| <= " + std::to_string(bound));
      break;
    }
    case Family::RandomShiftBernoulli:
      r.mean_m1 = 0.5 * spec.shift - 0.5 * spec.shift;
      r.h2_bound = std::exp(r.lambda1 * spec.shift);
      r.lambda3 = std::exp(r.lambda2 * 1.0);
      r.notes.emplace_back("bounded support: |U_1| = 1, any lambda2 works");
      break;
    case Family::RandomMeanGaussian:
      r.mean_m1 = 0.0;
      r.h2_bound = abs_gauss_mgf(r.lambda1, spec.sigma_a);
      r.lambda3 = abs_gauss_mgf(r.lambda2, spec.tau);
      r.notes.emplace_back("Gaussian exponential moments are finite for every lambda");
      break;
  }
  r.h1 = std::abs(r.mean_m1) <= 1e-12 && r.sigma_q_sq > 0.0 && std::isfinite(r.sigma_q_sq);
  r.h2 = std::isfinite(r.h2_bound);
  r.h3 = std::isfinite(r.lambda3);
  return r;
}

}  // namespace tubewalk
