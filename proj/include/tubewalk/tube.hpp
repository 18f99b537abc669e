#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tubewalk/error.hpp"

namespace tubewalk {

/// Continuous piecewise-linear function on [0, 1] given by its knots.
class PiecewiseLinear {
 public:
  struct Knot {
    double s;
    double value;
  };

  PiecewiseLinear() : knots_{{0.0, 0.0}, {1.0, 0.0}} {}

  explicit PiecewiseLinear(std::vector<Knot> knots) : knots_(std::move(knots)) {
    if (knots_.size() < 2) throw InvalidSpec("boundary: need at least two knots");
    if (knots_.front().s != 0.0 || knots_.back().s != 1.0)
      throw InvalidSpec("boundary: knots must start at s=0 and end at s=1");
    for (std::size_t k = 1; k < knots_.size(); ++k)
      if (!(knots_[k].s > knots_[k - 1].s))
        throw InvalidSpec("boundary: knot abscissae must be strictly increasing");
    for (const auto& k : knots_)
      if (!std::isfinite(k.value)) throw InvalidSpec("boundary: knot values must be finite");
  }

  static PiecewiseLinear constant(double v) { return PiecewiseLinear({{0.0, v}, {1.0, v}}); }
  static PiecewiseLinear linear(double v0, double v1) { return PiecewiseLinear({{0.0, v0}, {1.0, v1}}); }

  double operator()(double s) const {
    if (s <= 0.0) return knots_.front().value;
    if (s >= 1.0) return knots_.back().value;
    auto it = std::upper_bound(knots_.begin(), knots_.end(), s,
                               [](double x, const Knot& k) { return x < k.s; });
    const Knot& b = *it;
    const Knot& a = *(it - 1);
    const double w = (s - a.s) / (b.s - a.s);
    return a.value + w * (b.value - a.value);
  }

  const std::vector<Knot>& knots() const noexcept { return knots_; }

 private:
  std::vector<Knot> knots_;
};

struct Window {
  double lo;
  double hi;
};

/// Closed interval [lower, upper]. Membership allows a relative slack of 1e-9
/// so lattice points that sit exactly on a bound survive despite rounding in
/// n^alpha.
struct Bounds {
  double lower;
  double upper;

  static constexpr double kSlack = 1e-9;

  double lower_tol() const noexcept { return lower - kSlack * std::max(1.0, std::abs(lower)); }
  double upper_tol() const noexcept { return upper + kSlack * std::max(1.0, std::abs(upper)); }
  bool contains(double x) const noexcept { return x >= lower_tol() && x <= upper_tol(); }
  bool empty() const noexcept { return lower_tol() > upper_tol(); }
  double width() const noexcept { return upper - lower; }
};

/// The moving tube [g(i/n) n^alpha, h(i/n) n^alpha], 0 <= i <= n, entered at
/// time f_offset. Windows are in units of n^alpha.
struct TubeSpec {
  PiecewiseLinear g = PiecewiseLinear::constant(-1.0);
  PiecewiseLinear h = PiecewiseLinear::constant(1.0);
  double alpha = 0.25;
  std::size_t n = 1;
  std::size_t f_offset = 0;
  std::optional<Window> start_window;
  std::optional<Window> end_window;
  std::optional<double> xi_threshold;

  static TubeSpec constant(double a, double b, double alpha, std::size_t n) {
    TubeSpec t;
    t.g = PiecewiseLinear::constant(a);
    t.h = PiecewiseLinear::constant(b);
    t.alpha = alpha;
    t.n = n;
    return t;
  }

  TubeSpec with_n(std::size_t new_n, std::size_t new_offset) const {
    TubeSpec t = *this;
    t.n = new_n;
    t.f_offset = new_offset;
    return t;
  }

  double scale() const { return std::pow(static_cast<double>(n), alpha); }

  /// Union of the knot abscissae of g and h.
  std::vector<double> breakpoints() const {
    std::vector<double> s;
    for (const auto& k : g.knots()) s.push_back(k.s);
    for (const auto& k : h.knots()) s.push_back(k.s);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  }

  void validate() const {
    if (!(alpha > 0.0 && alpha < 0.5)) throw InvalidSpec("tube: alpha must lie in (0, 1/2)");
    if (n < 1) throw InvalidSpec("tube: n must be >= 1");
    // g, h linear between the merged breakpoints, so checking there suffices.
    for (double s : breakpoints())
      if (!(g(s) < h(s)))
        throw InvalidSpec("tube: g(s) < h(s) violated at s=" + std::to_string(s));
    if (start_window) {
      const auto [a0, b0] = *start_window;
      if (!(g(0.0) < a0 && a0 <= b0 && b0 < h(0.0)))
        throw InvalidSpec("tube: start window must satisfy g(0) < a0 <= b0 < h(0)");
    }
    if (end_window) {
      const auto [a1, b1] = *end_window;
      if (!(g(1.0) <= a1 && a1 < b1 && b1 <= h(1.0)))
        throw InvalidSpec("tube: end window must satisfy g(1) <= a' < b' <= h(1)");
    }
    if (xi_threshold && !(*xi_threshold > 0.0))
      throw InvalidSpec("tube: r_n must be positive");
  }
};

inline Bounds bounds_at(const TubeSpec& tube, std::size_t i) {
  if (i > tube.n) throw InvalidSpec("bounds_at: i must be in [0, n]");
  const double s = static_cast<double>(i) / static_cast<double>(tube.n);
  const double sc = tube.scale();
  return {tube.g(s) * sc, tube.h(s) * sc};
}

/// Admissible set at time i, including the end window at i = n.
inline Bounds slice_bounds(const TubeSpec& tube, std::size_t i) {
  Bounds b = bounds_at(tube, i);
  if (i == tube.n && tube.end_window) {
    const double sc = tube.scale();
    b.lower = std::max(b.lower, tube.end_window->lo * sc);
    b.upper = std::min(b.upper, tube.end_window->hi * sc);
  }
  return b;
}

inline double simpson(auto&& f, double a, double b, std::size_t panels) {
  const std::size_t m = 2 * std::max<std::size_t>(panels, 1);
  const double step = (b - a) / static_cast<double>(m);
  double acc = f(a) + f(b);
  for (std::size_t k = 1; k < m; ++k) acc += (k % 2 ? 4.0 : 2.0) * f(a + step * static_cast<double>(k));
  return acc * step / 3.0;
}

/// C_{g,h} = int_0^1 (h - g)^{-2} ds by composite Simpson. Panel edges include
/// every breakpoint; `panels` are spread over [0, 1] in proportion to segment
/// length, at least one per segment.
inline double c_gh(const TubeSpec& tube, std::size_t panels = 256) {
  if (panels < 1) throw InvalidSpec("c_gh: panels must be >= 1");
  tube.validate();
  const auto bp = tube.breakpoints();
  const auto integrand = [&](double s) {
    const double w = tube.h(s) - tube.g(s);
    return 1.0 / (w * w);
  };
  double total = 0.0;
  for (std::size_t k = 1; k < bp.size(); ++k) {
    const double len = bp[k] - bp[k - 1];
    const auto p = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(len * static_cast<double>(panels))));
    total += simpson(integrand, bp[k - 1], bp[k], p);
  }
  return total;
}

/// |c_gh(2 * panels) - c_gh(panels)|.
inline double c_gh_refinement_delta(const TubeSpec& tube, std::size_t panels = 256) {
  return std::abs(c_gh(tube, 2 * panels) - c_gh(tube, panels));
}

/// Coefficient of n^{1 - 2 alpha} in ln P: -C_{g,h} sigma_Q^2 gamma(sigma_A / sigma_Q).
inline double predicted_rate(const TubeSpec& tube, double sigma_a_sq, double sigma_q_sq,
                             double gamma_value) {
  (void)sigma_a_sq;  // enters only through gamma_value
  return -c_gh(tube) * sigma_q_sq * gamma_value;
}

}  // namespace tubewalk
