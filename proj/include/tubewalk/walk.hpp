#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <vector>

#include "tubewalk/csv.hpp"
#include "tubewalk/env.hpp"

namespace tubewalk {

/// A sampled quenched path with its decomposition S = S_0 + M + U and the
/// cumulative quenched variance Gamma. All four sequences have length+1 entries.
struct WalkPath {
  std::vector<double> s;
  std::vector<double> m;
  std::vector<double> u;
  std::vector<double> gamma;

  std::size_t length() const noexcept { return s.empty() ? 0 : s.size() - 1; }
};

inline void check_window(const EnvRealization& env, std::size_t start_index, std::size_t length) {
  if (start_index + length > env.size())
    throw InvalidSpec("walk: start_index + length exceeds environment length");
}

/// Path of `length` steps from x0; step i uses env.steps[start_index + i].
inline WalkPath sample_path(const EnvRealization& env, std::size_t start_index,
                            std::size_t length, double x0, std::uint64_t seed) {
  check_window(env, start_index, length);
  WalkPath p;
  p.s.reserve(length + 1);
  p.m.reserve(length + 1);
  p.u.reserve(length + 1);
  p.gamma.reserve(length + 1);
  p.s.push_back(x0);
  p.m.push_back(0.0);
  p.u.push_back(0.0);
  p.gamma.push_back(0.0);
  CounterRng rng(seed);
  for (std::size_t i = 0; i < length; ++i) {
    const StepLaw& law = env[start_index + i];
    const double x = law.sample(rng);
    p.s.push_back(p.s.back() + x);
    p.m.push_back(p.m.back() + law.quenched_mean);
    p.u.push_back(p.u.back() + (x - law.quenched_mean));
    p.gamma.push_back(p.gamma.back() + law.quenched_var);
  }
  return p;
}

/// Debug dump: columns i, s, m, u, gamma.
inline void write_path_csv(const WalkPath& p, std::ostream& os) {
  os << "i,s,m,u,gamma\n";
  for (std::size_t i = 0; i < p.s.size(); ++i)
    os << i << ',' << csv::num(p.s[i]) << ',' << csv::num(p.m[i]) << ',' << csv::num(p.u[i]) << ','
       << csv::num(p.gamma[i]) << '\n';
}

}  // namespace tubewalk
