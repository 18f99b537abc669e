#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tubewalk/config.hpp"
#include "tubewalk/csv.hpp"
#include "tubewalk/walk.hpp"

namespace tubewalk::cli {

inline constexpr int kSchemaVersion = 1;

struct Args {
  std::string subcommand;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::optional<std::string> out;
};

using Json = nlohmann::ordered_json;

namespace detail {

inline Json num_json(double v) {
  // JSON has no inf/nan; keep them readable as strings.
  if (std::isfinite(v)) return v;
  return csv::num(v);
}

inline Json opt_num(const std::optional<double>& v) { return v ? num_json(*v) : Json(nullptr); }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

inline Json envelope(const ExperimentConfig& cfg, const std::string& kind) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  j["seed"] = cfg.seed;
  j["config_hash"] = config_hash(cfg);
  j["config"] = cfg.resolved;
  return j;
}

inline std::vector<EstimatorKind> simulate_methods(const ExperimentConfig& cfg, const EnvRealization& env,
                                                   const TubeSpec& tube) {
  if (cfg.method != "all") return {cfg.estimator.method};
  std::vector<EstimatorKind> kinds;
  const std::span<const StepLaw> steps(env.steps.data() + tube.f_offset, tube.n);
  if (lattice_denominator(steps)) kinds.push_back(EstimatorKind::DpLattice);
  kinds.insert(kinds.end(), {EstimatorKind::Grid, EstimatorKind::NaiveMC, EstimatorKind::Splitting});
  return kinds;
}

inline std::string svg_chart(const RateFit& fit, const std::vector<CheckRow>& rows) {
  double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
  bool first = true;
  for (const auto& r : rows) {
    if (!std::isfinite(r.estimate.log_p)) continue;
    if (first) {
      x_lo = x_hi = r.scaled_n;
      y_lo = y_hi = r.estimate.log_p;
      first = false;
    }
    x_lo = std::min(x_lo, r.scaled_n);
    x_hi = std::max(x_hi, r.scaled_n);
    y_lo = std::min(y_lo, r.estimate.log_p);
    y_hi = std::max(y_hi, r.estimate.log_p);
  }
  for (double x : {x_lo, x_hi}) {
    const double y = fit.intercept + fit.slope * x;
    y_lo = std::min(y_lo, y);
    y_hi = std::max(y_hi, y);
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;
  const double W = 640, H = 400, L = 70, R = 20, T = 30, B = 50;
  auto px = [&](double x) { return L + (x - x_lo) / (x_hi - x_lo) * (W - L - R); };
  auto py = [&](double y) { return T + (y_hi - y) / (y_hi - y_lo) * (H - T - B); };
  char buf[256];
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", L, H - B, W - R, H - B);
  s += buf;
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", L, T, L, H - B);
  s += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">n^(1-2 alpha)</text>\n", (L + W - R) / 2, H - 12);
  s += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"16\" y=\"%g\" transform=\"rotate(-90 16 %g)\" text-anchor=\"middle\">ln p</text>\n", (T + H - B) / 2, (T + H - B) / 2);
  s += buf;
  for (double x : {x_lo, x_hi}) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%g\" text-anchor=\"middle\">%.4g</text>\n", px(x), H - B + 16, x);
    s += buf;
  }
  for (double y : {y_lo, y_hi}) {
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%.2f\" text-anchor=\"end\">%.4g</text>\n", L - 6, py(y) + 4, y);
    s += buf;
  }
  std::snprintf(buf, sizeof buf, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>\n",
                px(x_lo), py(fit.intercept + fit.slope * x_lo), px(x_hi), py(fit.intercept + fit.slope * x_hi));
  s += buf;
  for (const auto& r : rows) {
    if (!std::isfinite(r.estimate.log_p)) continue;
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"#2c3e50\"/>\n", px(r.scaled_n), py(r.estimate.log_p));
    s += buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"20\">slope %.6g, r^2 %.6g</text>\n", L, fit.slope, fit.r_squared);
  s += buf;
  s += "</svg>\n";
  return s;
}

}  // namespace detail

/// survival.csv: one row per (n, method).
inline int cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const CheckConfig cc = cfg.check_config();
  const std::string hash = config_hash(cfg);
  struct Row {
    CheckRow row;
    std::string method;
  };
  const auto sizes = cfg.sizes();
  std::vector<std::vector<Row>> per_n(sizes.size());
  // n-values run sequentially; each estimator parallelizes internally.
  for (std::size_t idx = 0; idx < sizes.size(); ++idx) {
    const std::size_t n = sizes[idx];
    try {
      const std::size_t f = cc.offset(n);
      const TubeSpec tube = cc.tube.with_n(n, f);
      const EnvRealization env = sample_environment(cc.env, f + n, realization_seed(cc, n));
      for (EstimatorKind k : detail::simulate_methods(cfg, env, tube)) {
        EstimatorConfig est = cc.estimator;
        est.method = k;
        per_n[idx].push_back({check_row(cc, n, est), to_string(k)});
      }
    } catch (const std::exception& e) {
      throw EstimatorError("simulate: n=" + std::to_string(n) + ": " + e.what());
    }
  }

  std::ostringstream os;
  os << "n,f_offset,x0,method,estimator,p,log_p,stderr_log,work,flagged,env_seed,seed,config_hash\n";
  Json rows = Json::array();
  for (const auto& group : per_n) {
    for (const auto& [r, m] : group) {
      const auto& e = r.estimate;
      os << r.n << ',' << r.f_offset << ',' << csv::num(r.x0) << ',' << csv::field(m) << ','
         << csv::field(to_string(e.method)) << ',' << csv::num(e.p) << ',' << csv::num(e.log_p) << ','
         << (e.stderr_log ? csv::num(*e.stderr_log) : "") << ',' << e.work << ',' << (e.flagged ? 1 : 0) << ','
         << r.env_seed << ',' << cfg.seed << ',' << hash << '\n';
      rows.push_back({{"n", r.n},
                      {"f_offset", r.f_offset},
                      {"x0", r.x0},
                      {"method", m},
                      {"estimator", to_string(e.method)},
                      {"p", detail::num_json(e.p)},
                      {"log_p", detail::num_json(e.log_p)},
                      {"stderr_log", detail::opt_num(e.stderr_log)},
                      {"refinement_delta", detail::opt_num(e.refinement_delta)},
                      {"work", e.work},
                      {"flagged", e.flagged},
                      {"env_seed", r.env_seed}});
    }
  }
  if (cfg.output.wants("csv")) detail::write_text(out / "survival.csv", os.str());
  if (cfg.output.wants("json")) {
    Json j = detail::envelope(cfg, "simulate");
    j["rows"] = rows;
    detail::write_text(out / "simulate.json", j.dump(2) + "\n");
  }

  // One sample path on the first realization, for inspection.
  if (cfg.output.wants("csv")) {
    const std::size_t n = sizes.front();
    const std::size_t f = cc.offset(n);
    const TubeSpec tube = cc.tube.with_n(n, f);
    const EnvRealization env = sample_environment(cc.env, f + n, realization_seed(cc, n));
    const double x0 = (cfg.x0 ? *cfg.x0 : 0.5 * (tube.g(0.0) + tube.h(0.0))) * tube.scale();
    std::ostringstream ps;
    write_path_csv(sample_path(env, f, n, x0, derive_seed(cfg.seed, Stream::Walk, n, 0x9a7)), ps);
    detail::write_text(out / "path.csv", ps.str());
  }
  return 0;
}

/// gamma.csv: one row per beta.
inline int cmd_gamma(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const std::string hash = config_hash(cfg);
  std::vector<GammaEstimate> est;
  for (double b : cfg.gamma.beta)
    est.push_back(estimate_gamma(b, cfg.gamma.t, cfg.gamma.dt, cfg.gamma.grid, cfg.gamma.replicas,
                                 derive_seed(cfg.seed, Stream::BrownianDrift, 0, 1)));

  std::ostringstream os;
  os << "beta,gamma_hat,ci_lo,ci_hi,t,dt,grid,replicas,seed,config_hash\n";
  Json rows = Json::array();
  for (const auto& g : est) {
    os << csv::num(g.beta) << ',' << csv::num(g.gamma_hat) << ',' << csv::num(g.ci95.first) << ','
       << csv::num(g.ci95.second) << ',' << csv::num(g.horizon_t) << ',' << csv::num(g.dt) << ','
       << g.grid_points << ',' << g.env_replicas << ',' << cfg.seed << ',' << hash << '\n';
    rows.push_back({{"beta", g.beta},
                    {"gamma_hat", g.gamma_hat},
                    {"ci_lo", g.ci95.first},
                    {"ci_hi", g.ci95.second},
                    {"t", g.horizon_t},
                    {"dt", g.dt},
                    {"grid", g.grid_points},
                    {"replicas", g.env_replicas},
                    {"per_replica", g.per_replica_values}});
  }
  if (cfg.output.wants("csv")) detail::write_text(out / "gamma.csv", os.str());
  if (cfg.output.wants("json")) {
    Json j = detail::envelope(cfg, "gamma");
    j["rows"] = rows;
    detail::write_text(out / "gamma.json", j.dump(2) + "\n");
  }
  return 0;
}

/// fit.json, fit.csv and optionally fit.svg. Exit status 0 when the
/// discrepancy is within tolerance, 3 otherwise.
inline int cmd_fit(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  if (cfg.n) throw InvalidSpec("fit: tube.n selects a single size; use tube.n_list with at least 3 values");
  const CheckConfig cc = cfg.check_config();
  const CheckReport rep = theorem_check(cc);
  const std::string hash = config_hash(cfg);

  std::ostringstream os;
  os << "n,scaled_n,log_p,seed,config_hash\n";
  Json table = Json::array();
  for (const auto& r : rep.rows) {
    os << r.n << ',' << csv::num(r.scaled_n) << ',' << csv::num(r.estimate.log_p) << ',' << cfg.seed << ','
       << hash << '\n';
    table.push_back({{"n", r.n},
                     {"f_offset", r.f_offset},
                     {"scaled_n", r.scaled_n},
                     {"x0", r.x0},
                     {"method", to_string(r.estimate.method)},
                     {"log_p", detail::num_json(r.estimate.log_p)},
                     {"stderr_log", detail::opt_num(r.estimate.stderr_log)},
                     {"refinement_delta", detail::opt_num(r.estimate.refinement_delta)},
                     {"flagged", r.estimate.flagged},
                     {"env_seed", r.env_seed}});
  }
  if (cfg.output.wants("csv")) detail::write_text(out / "fit.csv", os.str());

  Json j = detail::envelope(cfg, "fit");
  j["spec"] = {{"family", to_string(cc.env.family)},
               {"sigma_a_sq", rep.moments.sigma_a_sq},
               {"sigma_q_sq", rep.moments.sigma_q_sq},
               {"beta", rep.beta},
               {"alpha", cc.tube.alpha},
               {"n_list", cc.n_list},
               {"c_gh", rep.c_gh}};
  j["rows"] = table;
  j["fit"] = {{"slope", rep.fit.slope},
              {"intercept", rep.fit.intercept},
              {"r_squared", rep.fit.r_squared},
              {"slope_ci95", {rep.fit.slope_ci95.first, rep.fit.slope_ci95.second}},
              {"points_used", rep.fit.points.size()}};
  Json gamma = {{"value", rep.gamma_value},
                {"source", cc.gamma.kind == GammaSource::Kind::Reference ? "reference" : "estimate"}};
  if (rep.gamma_estimate)
    gamma["ci95"] = {rep.gamma_estimate->ci95.first, rep.gamma_estimate->ci95.second};
  j["prediction"] = {{"slope", rep.predicted}, {"gamma", gamma}};
  j["discrepancy"] = rep.discrepancy;
  j["tolerance"] = rep.tolerance;
  j["pass"] = rep.pass;
  if (cfg.output.wants("json")) detail::write_text(out / "fit.json", j.dump(2) + "\n");
  if (cfg.output.wants("svg")) detail::write_text(out / "fit.svg", detail::svg_chart(rep.fit, rep.rows));

  std::cout << "fit: slope " << rep.fit.slope << ", predicted " << rep.predicted << ", discrepancy "
            << rep.discrepancy << (rep.pass ? " (pass)" : " (FAIL)") << '\n';
  return rep.pass ? 0 : 3;
}

struct SelfTest {
  std::string name;
  double value;
  double threshold;
  bool pass;
  std::string detail;
};

/// Quick invariant checks on the configured environment and tube.
inline std::vector<SelfTest> self_tests(const ExperimentConfig& cfg) {
  std::vector<SelfTest> out;
  const CheckConfig cc = cfg.check_config();
  const Moments mom = moments(cc.env);

  {
    const std::size_t n = cfg.sizes().front();
    const TubeSpec t = cc.tube.with_n(n, cc.offset(n));
    const double d = c_gh_refinement_delta(t);
    out.push_back({"c_gh_refinement", d, 1e-8, d < 1e-8, "C_gh = " + csv::num(c_gh(t))});
  }
  {
    // Sample moments of the step laws against the closed forms.
    const std::size_t len = 20000;
    const EnvRealization env = sample_environment(cc.env, len, derive_seed(cfg.seed, Stream::Environment, 0xf00d));
    double m1 = 0.0, m2 = 0.0, q = 0.0;
    for (const auto& s : env.steps) {
      m1 += s.quenched_mean;
      m2 += s.quenched_mean * s.quenched_mean;
      q += s.quenched_var;
    }
    const auto L = static_cast<double>(len);
    const double var_a = m2 / L - (m1 / L) * (m1 / L);
    const double err_a = std::abs(var_a - mom.sigma_a_sq) / std::max(mom.sigma_a_sq, 1.0);
    const double err_q = std::abs(q / L - mom.sigma_q_sq) / mom.sigma_q_sq;
    out.push_back({"sigma_a_sq_sample", err_a, 0.05, err_a <= 0.05, "sample " + csv::num(var_a)});
    out.push_back({"sigma_q_sq_sample", err_q, 0.05, err_q <= 0.05, "sample " + csv::num(q / L)});
  }
  {
    const EnvRealization env = sample_environment(cc.env, 1000, derive_seed(cfg.seed, Stream::Environment, 0xbeef));
    const WalkPath p = sample_path(env, 0, 1000, 0.0, derive_seed(cfg.seed, Stream::Walk, 0xbeef));
    double worst = 0.0;
    for (std::size_t i = 0; i < p.s.size(); ++i) worst = std::max(worst, std::abs(p.s[i] - p.m[i] - p.u[i]));
    out.push_back({"walk_decomposition", worst, 1e-9, worst <= 1e-9, "max |S - M - U|"});
  }
  {
    // Exact or grid reference against a Monte Carlo estimator on a short tube.
    const std::size_t n = 40;
    const std::size_t f = cc.offset(n);
    TubeSpec t = cc.tube.with_n(n, f);
    const EnvRealization env = sample_environment(cc.env, f + n, derive_seed(cfg.seed, Stream::Environment, 0xcafe));
    const double x0 = (cfg.x0 ? *cfg.x0 : 0.5 * (t.g(0.0) + t.h(0.0))) * t.scale();
    const std::span<const StepLaw> steps(env.steps.data() + f, n);
    const bool lattice = lattice_denominator(steps).has_value();
    const SurvivalEstimate ref =
        lattice ? survival_dp_lattice(env, t, x0) : survival_grid(env, t, x0, 400, cc.estimator.grid_tolerance);
    const std::string ref_name = lattice ? "dp" : "grid";
    // Grid error budget: its own refinement delta.
    const double ref_slack = ref.refinement_delta.value_or(0.0);
    if (ref.p >= 0.01) {
      const SurvivalEstimate mc = survival_naive_mc(env, t, x0, 4000, derive_seed(cfg.seed, Stream::Walk, 0xcafe));
      const double se = std::sqrt(ref.p * (1.0 - ref.p) / 4000.0);
      const double z = std::abs(mc.p - ref.p) / (se + ref_slack * ref.p);
      out.push_back({ref_name + "_vs_naive_mc", z, 5.0, z <= 5.0,
                     "ref p " + csv::num(ref.p) + ", naive p " + csv::num(mc.p)});
    } else {
      const SurvivalEstimate sp =
          survival_splitting(env, t, x0, 2000, 10, derive_seed(cfg.seed, Stream::Walk, 0xcafe));
      const double rel = std::abs(sp.log_p - ref.log_p) / std::abs(ref.log_p);
      out.push_back({ref_name + "_vs_splitting", rel, 0.1 + ref_slack, rel <= 0.1 + ref_slack,
                     "ref log_p " + csv::num(ref.log_p) + ", splitting " + csv::num(sp.log_p)});
    }
  }
  {
    std::vector<RatePoint> pts;
    for (std::size_t n : {100, 200, 400, 800}) pts.push_back({n, 2.0 - 1.5 * std::pow(static_cast<double>(n), 0.4)});
    const RateFit fit = decay_fit(pts, 0.3);
    const double err = std::abs(fit.slope + 1.5);
    out.push_back({"decay_fit_synthetic", err, 1e-9, err <= 1e-9 && fit.r_squared > 1.0 - 1e-12, "exact line"});
  }
  return out;
}

/// verify.json and verify.csv; exit 0 iff every assumption flag and self-test passes.
inline int cmd_verify(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const AssumptionReport a = verify_assumptions(cfg.env);
  const auto tests = self_tests(cfg);
  const std::string hash = config_hash(cfg);
  bool ok = a.all_pass();

  std::ostringstream os;
  os << "check,value,threshold,pass,seed,config_hash\n";
  for (const auto& [name, flag] : {std::pair{"H1", a.h1}, std::pair{"H2", a.h2}, std::pair{"H3", a.h3}})
    os << name << ",,," << (flag ? 1 : 0) << ',' << cfg.seed << ',' << hash << '\n';
  Json jt = Json::array();
  for (const auto& t : tests) {
    ok = ok && t.pass;
    os << csv::field(t.name) << ',' << csv::num(t.value) << ',' << csv::num(t.threshold) << ',' << (t.pass ? 1 : 0)
       << ',' << cfg.seed << ',' << hash << '\n';
    jt.push_back({{"name", t.name}, {"value", detail::num_json(t.value)}, {"threshold", t.threshold},
                  {"pass", t.pass}, {"detail", t.detail}});
  }
  if (cfg.output.wants("csv")) detail::write_text(out / "verify.csv", os.str());

  Json j = detail::envelope(cfg, "verify");
  j["assumptions"] = {{"h1", a.h1},
                      {"h2", a.h2},
                      {"h3", a.h3},
                      {"mean_m1", a.mean_m1},
                      {"sigma_a_sq", a.sigma_a_sq},
                      {"sigma_q_sq", a.sigma_q_sq},
                      {"lambda1", a.lambda1},
                      {"h2_bound", detail::num_json(a.h2_bound)},
                      {"lambda2", a.lambda2},
                      {"lambda3", detail::num_json(a.lambda3)},
                      {"notes", a.notes}};
  j["self_tests"] = jt;
  j["pass"] = ok;
  if (cfg.output.wants("json")) detail::write_text(out / "verify.json", j.dump(2) + "\n");
  for (const auto& t : tests)
    std::cout << (t.pass ? "ok   " : "FAIL ") << t.name << " = " << t.value << " (limit " << t.threshold << ")\n";
  std::cout << "assumptions: H1 " << a.h1 << ", H2 " << a.h2 << ", H3 " << a.h3 << '\n';
  return ok ? 0 : 3;
}

/// report.json: the JSON outputs already present in the output directory.
inline int cmd_report(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const std::string hash = config_hash(cfg);
  Json j = detail::envelope(cfg, "report");
  Json parts = Json::object();
  Json mismatched = Json::array();
  for (const char* name : {"simulate", "gamma", "fit", "verify"}) {
    const auto path = out / (std::string(name) + ".json");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream is(path);
    Json part = Json::parse(is);
    if (part.value("config_hash", std::string()) != hash) mismatched.push_back(name);
    part.erase("config");
    parts[name] = std::move(part);
  }
  if (parts.empty())
    throw std::runtime_error("report: no simulate/gamma/fit/verify JSON outputs in " + out.string());
  j["sections"] = parts;
  j["config_hash_mismatch"] = mismatched;
  detail::write_text(out / "report.json", j.dump(2) + "\n");
  if (!mismatched.empty()) std::cerr << "report: some sections were produced from a different config\n";
  return 0;
}

/// Loads the config, writes config.resolved.json and dispatches. Returns the
/// process exit status: 0 ok, 2 invalid config, 3 check failed, 4 runtime error.
inline int run(const Args& args) {
  static const std::set<std::string> known = {"simulate", "gamma", "fit", "verify", "report"};
  if (!known.count(args.subcommand)) {
    std::cerr << "error: unknown subcommand '" << args.subcommand << "'\n";
    return 2;
  }
  ExperimentConfig cfg;
  try {
    cfg = load_config(args.config_path, args.overrides, args.seed, args.out);
  } catch (const InvalidSpec& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  try {
    const std::filesystem::path out(cfg.output.directory);
    std::filesystem::create_directories(out);
    detail::write_text(out / "config.resolved.json", cfg.resolved.dump(2) + "\n");
    if (args.subcommand == "simulate") return cmd_simulate(cfg, out);
    if (args.subcommand == "gamma") return cmd_gamma(cfg, out);
    if (args.subcommand == "fit") return cmd_fit(cfg, out);
    if (args.subcommand == "verify") return cmd_verify(cfg, out);
    return cmd_report(cfg, out);
  } catch (const InvalidSpec& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}

}  // namespace tubewalk::cli
