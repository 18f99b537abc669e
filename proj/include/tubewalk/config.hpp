#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "json.hpp"
#include "tubewalk/rate.hpp"

namespace tubewalk {

struct GammaTable {
  std::vector<double> beta{0.0, 0.5, 1.0};
  double t = 8.0;
  double dt = 1e-3;
  std::size_t grid = 400;
  std::size_t replicas = 8;
  std::string source = "auto";  // auto | reference | estimate
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json"};

  bool wants(const std::string& f) const {
    return std::find(formats.begin(), formats.end(), f) != formats.end();
  }
};

/// Fully validated experiment description. `resolved` holds every setting,
/// defaults included, and is what the config hash is computed from.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  EnvironmentSpec env;
  std::optional<std::uint64_t> env_seed;
  bool shared_environment = false;
  TubeSpec tube;
  std::optional<std::size_t> n;
  std::vector<std::size_t> n_list;
  OffsetRule offset;
  std::optional<double> x0;
  bool sweep_start = false;
  std::string method = "auto";  // auto | dp | grid | naive | splitting | all
  EstimatorConfig estimator;
  double tolerance = 0.2;
  GammaTable gamma;
  OutputConfig output;
  nlohmann::ordered_json resolved;

  std::uint64_t realization_master() const { return env_seed.value_or(seed); }

  /// Sizes to run: `tube.n` alone when set, otherwise `tube.n_list`.
  std::vector<std::size_t> sizes() const { return n ? std::vector<std::size_t>{*n} : n_list; }

  CheckConfig check_config() const;
};

namespace detail {

inline void reject_unknown(const YAML::Node& node, const std::string& table,
                           std::initializer_list<const char*> allowed) {
  if (!node || node.IsNull()) return;
  if (!node.IsMap()) throw InvalidSpec("config: '" + table + "' must be a table");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) throw InvalidSpec("config: unknown key '" + (table.empty() ? key : table + "." + key) + "'");
  }
}

template <class T>
T get(const YAML::Node& node, const char* key, const std::string& table, T fallback) {
  if (!node || !node[key]) return fallback;
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw InvalidSpec("config: " + table + "." + key + ": wrong type");
  }
}

template <class T>
std::optional<T> get_opt(const YAML::Node& node, const char* key, const std::string& table) {
  if (!node || !node[key] || node[key].IsNull()) return std::nullopt;
  return get<T>(node, key, table, T{});
}

inline PiecewiseLinear knots(const YAML::Node& node, const std::string& path, double fallback) {
  if (!node || node.IsNull()) return PiecewiseLinear::constant(fallback);
  // A bare number is a constant boundary.
  if (node.IsScalar()) return PiecewiseLinear::constant(node.as<double>());
  std::vector<PiecewiseLinear::Knot> k;
  try {
    for (const auto& p : node) {
      if (!p.IsSequence() || p.size() != 2) throw InvalidSpec("config: " + path + ": knots are [s, value] pairs");
      k.push_back({p[0].as<double>(), p[1].as<double>()});
    }
  } catch (const YAML::Exception&) {
    throw InvalidSpec("config: " + path + ": knots must be numbers");
  }
  try {
    return PiecewiseLinear(std::move(k));
  } catch (const InvalidSpec& e) {
    throw InvalidSpec("config: " + path + ": " + e.what());
  }
}

inline std::optional<Window> window(const YAML::Node& node, const std::string& path) {
  if (!node || node.IsNull()) return std::nullopt;
  if (!node.IsSequence() || node.size() != 2) throw InvalidSpec("config: " + path + ": expected [lo, hi]");
  return Window{node[0].as<double>(), node[1].as<double>()};
}

inline nlohmann::ordered_json knots_json(const PiecewiseLinear& f) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& k : f.knots()) arr.push_back({k.s, k.value});
  return arr;
}

template <class T>
nlohmann::ordered_json opt_json(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json window_json(const std::optional<Window>& w) {
  return w ? nlohmann::ordered_json::array({w->lo, w->hi}) : nlohmann::ordered_json(nullptr);
}

/// Sets a dotted key path to a YAML-parsed value, creating tables on the way.
inline void apply_override(YAML::Node& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InvalidSpec("--set expects key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw InvalidSpec("--set " + path + ": cannot parse value: " + e.what());
  }
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
  // yaml-cpp nodes are handles; walk by reassigning copies of the handles.
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node child = chain.back()[parts[i]];
    if (!child || child.IsNull()) {
      chain.back()[parts[i]] = YAML::Node(YAML::NodeType::Map);
      child = chain.back()[parts[i]];
    }
    chain.push_back(child);
  }
  chain.back()[parts.back()] = value;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// FNV-1a over the bytes of s.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline XiMode xi_mode_from_string(const std::string& s) {
  if (s == "analytic") return XiMode::Analytic;
  if (s == "sampled") return XiMode::Sampled;
  throw InvalidSpec("config: tube.xi_mode must be 'analytic' or 'sampled'");
}

inline EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "auto" || s == "all") return EstimatorKind::Auto;
  if (s == "dp") return EstimatorKind::DpLattice;
  if (s == "grid") return EstimatorKind::Grid;
  if (s == "naive") return EstimatorKind::NaiveMC;
  if (s == "splitting") return EstimatorKind::Splitting;
  throw InvalidSpec("config: estimator.method: unknown method '" + s + "'");
}

}  // namespace detail

inline CheckConfig ExperimentConfig::check_config() const {
  CheckConfig c;
  c.env = env;
  c.tube = tube;
  c.n_list = n_list;
  c.offset = offset;
  c.estimator = estimator;
  c.x0 = x0;
  c.sweep_start = sweep_start;
  c.shared_environment = shared_environment;
  c.seed = seed;
  c.env_seed = env_seed;
  c.tolerance = tolerance;
  const bool random_env = moments(env).sigma_a_sq > 0.0;
  const bool use_reference = gamma.source == "reference" || (gamma.source == "auto" && !random_env);
  c.gamma = {use_reference ? GammaSource::Kind::Reference : GammaSource::Kind::Estimate, gamma.t, gamma.dt,
             gamma.grid, gamma.replicas};
  return c;
}

/// Parses, overrides, validates and resolves a config document.
inline ExperimentConfig parse_config(YAML::Node root, const std::vector<std::string>& overrides = {},
                                     std::optional<std::uint64_t> seed_override = std::nullopt,
                                     std::optional<std::string> out_override = std::nullopt) {
  using namespace detail;
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  for (const auto& o : overrides) apply_override(root, o);
  reject_unknown(root, "", {"seed", "environment", "tube", "estimator", "gamma", "output"});

  ExperimentConfig cfg;
  cfg.seed = seed_override.value_or(get<std::uint64_t>(root, "seed", "", 1));

  const YAML::Node e = root["environment"];
  reject_unknown(e, "environment",
                 {"family", "atoms", "shift", "lattice_q", "sigma_a", "tau", "xi_scale", "seed", "shared"});
  cfg.env.family = family_from_string(get<std::string>(e, "family", "environment", "degenerate"));
  if (e && e["atoms"]) {
    for (const auto& a : e["atoms"]) {
      if (!a.IsSequence() || a.size() != 2) throw InvalidSpec("config: environment.atoms: expected [position, weight] pairs");
      cfg.env.atoms.push_back({a[0].as<double>(), a[1].as<double>()});
    }
  } else if (cfg.env.family == Family::Degenerate) {
    cfg.env.atoms = {{-1.0, 0.5}, {1.0, 0.5}};
  }
  cfg.env.shift = get<double>(e, "shift", "environment", 0.5);
  cfg.env.lattice_q = get<int>(e, "lattice_q", "environment", 2);
  cfg.env.sigma_a = get<double>(e, "sigma_a", "environment", 1.0);
  cfg.env.tau = get<double>(e, "tau", "environment", 1.0);
  cfg.env.xi_scale = get<double>(e, "xi_scale", "environment", 1.0);
  cfg.env_seed = get_opt<std::uint64_t>(e, "seed", "environment");
  cfg.shared_environment = get<bool>(e, "shared", "environment", false);
  try {
    cfg.env.validate();
  } catch (const InvalidSpec& ex) {
    throw InvalidSpec(std::string("config: ") + ex.what());
  }

  const YAML::Node t = root["tube"];
  reject_unknown(t, "tube",
                 {"alpha", "n", "n_list", "f_offset", "g", "h", "x0", "start_window", "end_window", "r_n",
                  "xi_mode", "start_sweep"});
  cfg.tube.alpha = get<double>(t, "alpha", "tube", 0.3);
  cfg.tube.g = knots(t ? t["g"] : YAML::Node(), "tube.g", -1.0);
  cfg.tube.h = knots(t ? t["h"] : YAML::Node(), "tube.h", 1.0);
  cfg.n = get_opt<std::size_t>(t, "n", "tube");
  if (t && t["n_list"]) cfg.n_list = t["n_list"].as<std::vector<std::size_t>>();
  if (!cfg.n && cfg.n_list.empty()) cfg.n_list = {200, 400, 800, 1600, 3200};
  const YAML::Node f = t ? t["f_offset"] : YAML::Node();
  reject_unknown(f, "tube.f_offset", {"c", "kappa"});
  cfg.offset.c = get<double>(f, "c", "tube.f_offset", 1.0);
  cfg.offset.kappa = get<double>(f, "kappa", "tube.f_offset", 0.5);
  if (!(cfg.offset.c >= 0.0) || !(cfg.offset.kappa >= 0.0))
    throw InvalidSpec("config: tube.f_offset: c and kappa must be >= 0");
  cfg.x0 = get_opt<double>(t, "x0", "tube");
  cfg.tube.start_window = window(t ? t["start_window"] : YAML::Node(), "tube.start_window");
  cfg.tube.end_window = window(t ? t["end_window"] : YAML::Node(), "tube.end_window");
  cfg.tube.xi_threshold = get_opt<double>(t, "r_n", "tube");
  const auto xi_mode = get<std::string>(t, "xi_mode", "tube", "analytic");
  cfg.estimator.xi_mode = xi_mode_from_string(xi_mode);
  cfg.sweep_start = get<bool>(t, "start_sweep", "tube", false);
  if (cfg.sweep_start && !cfg.tube.start_window)
    throw InvalidSpec("config: tube.start_sweep requires tube.start_window");
  for (std::size_t n : cfg.sizes()) {
    try {
      cfg.tube.with_n(n, cfg.offset(n)).validate();
    } catch (const InvalidSpec& ex) {
      throw InvalidSpec("config: tube (n=" + std::to_string(n) + "): " + ex.what());
    }
  }
  if (cfg.x0) {
    const double g0 = cfg.tube.g(0.0), h0 = cfg.tube.h(0.0);
    if (!(*cfg.x0 > g0 && *cfg.x0 < h0)) throw InvalidSpec("config: tube.x0 must lie in (g(0), h(0))");
  }
  cfg.tube.n = cfg.sizes().front();

  const YAML::Node s = root["estimator"];
  reject_unknown(s, "estimator",
                 {"method", "replicas", "particles", "checkpoints", "grid_points", "grid_tolerance", "tolerance"});
  cfg.method = get<std::string>(s, "method", "estimator", "auto");
  cfg.estimator.method = estimator_from_string(cfg.method);
  cfg.estimator.replicas = get<std::size_t>(s, "replicas", "estimator", 10000);
  cfg.estimator.particles = get<std::size_t>(s, "particles", "estimator", 10000);
  cfg.estimator.checkpoints = get<std::size_t>(s, "checkpoints", "estimator", 20);
  cfg.estimator.grid_points = get<std::size_t>(s, "grid_points", "estimator", 200);
  cfg.estimator.grid_tolerance = get<double>(s, "grid_tolerance", "estimator", 1e-2);
  cfg.tolerance = get<double>(s, "tolerance", "estimator", 0.2);
  if (cfg.estimator.replicas < 100) throw InvalidSpec("config: estimator.replicas must be >= 100");
  if (cfg.estimator.particles < 100) throw InvalidSpec("config: estimator.particles must be >= 100");
  if (cfg.estimator.checkpoints < 1) throw InvalidSpec("config: estimator.checkpoints must be >= 1");
  if (cfg.estimator.grid_points < 50) throw InvalidSpec("config: estimator.grid_points must be >= 50");
  if (!(cfg.tolerance > 0.0)) throw InvalidSpec("config: estimator.tolerance must be positive");

  const YAML::Node g = root["gamma"];
  reject_unknown(g, "gamma", {"beta", "t", "dt", "grid", "replicas", "source"});
  if (g && g["beta"]) {
    cfg.gamma.beta = g["beta"].IsSequence() ? g["beta"].as<std::vector<double>>()
                                            : std::vector<double>{g["beta"].as<double>()};
  }
  cfg.gamma.t = get<double>(g, "t", "gamma", 8.0);
  cfg.gamma.dt = get<double>(g, "dt", "gamma", 1e-3);
  cfg.gamma.grid = get<std::size_t>(g, "grid", "gamma", 400);
  cfg.gamma.replicas = get<std::size_t>(g, "replicas", "gamma", 8);
  cfg.gamma.source = get<std::string>(g, "source", "gamma", "auto");
  if (cfg.gamma.source != "auto" && cfg.gamma.source != "reference" && cfg.gamma.source != "estimate")
    throw InvalidSpec("config: gamma.source must be auto, reference or estimate");
  for (double b : cfg.gamma.beta)
    if (!(b >= 0.0)) throw InvalidSpec("config: gamma.beta values must be >= 0");
  if (cfg.gamma.replicas < 8) throw InvalidSpec("config: gamma.replicas must be >= 8");
  if (!(cfg.gamma.t > 0.0) || !(cfg.gamma.dt > 0.0)) throw InvalidSpec("config: gamma.t and gamma.dt must be positive");
  if (cfg.gamma.grid < 50) throw InvalidSpec("config: gamma.grid must be >= 50");

  const YAML::Node o = root["output"];
  reject_unknown(o, "output", {"directory", "formats"});
  cfg.output.directory = out_override.value_or(get<std::string>(o, "directory", "output", "out"));
  if (o && o["formats"]) cfg.output.formats = o["formats"].as<std::vector<std::string>>();
  for (const auto& fmt : cfg.output.formats)
    if (fmt != "csv" && fmt != "json" && fmt != "svg") throw InvalidSpec("config: output.formats: unknown format '" + fmt + "'");

  // Resolved form: every setting explicit, fixed key order.
  nlohmann::ordered_json r;
  r["seed"] = cfg.seed;
  auto& je = r["environment"];
  je["family"] = to_string(cfg.env.family);
  auto atoms = nlohmann::ordered_json::array();
  for (const auto& a : cfg.env.atoms) atoms.push_back({a.position, a.weight});
  je["atoms"] = atoms;
  je["shift"] = cfg.env.shift;
  je["lattice_q"] = cfg.env.lattice_q;
  je["sigma_a"] = cfg.env.sigma_a;
  je["tau"] = cfg.env.tau;
  je["xi_scale"] = cfg.env.xi_scale;
  je["seed"] = opt_json(cfg.env_seed);
  je["shared"] = cfg.shared_environment;
  auto& jt = r["tube"];
  jt["alpha"] = cfg.tube.alpha;
  jt["n"] = opt_json(cfg.n);
  jt["n_list"] = cfg.n_list;
  jt["f_offset"] = {{"c", cfg.offset.c}, {"kappa", cfg.offset.kappa}};
  jt["g"] = knots_json(cfg.tube.g);
  jt["h"] = knots_json(cfg.tube.h);
  jt["x0"] = opt_json(cfg.x0);
  jt["start_window"] = window_json(cfg.tube.start_window);
  jt["end_window"] = window_json(cfg.tube.end_window);
  jt["r_n"] = opt_json(cfg.tube.xi_threshold);
  jt["xi_mode"] = xi_mode;
  jt["start_sweep"] = cfg.sweep_start;
  auto& js = r["estimator"];
  js["method"] = cfg.method;
  js["replicas"] = cfg.estimator.replicas;
  js["particles"] = cfg.estimator.particles;
  js["checkpoints"] = cfg.estimator.checkpoints;
  js["grid_points"] = cfg.estimator.grid_points;
  js["grid_tolerance"] = cfg.estimator.grid_tolerance;
  js["tolerance"] = cfg.tolerance;
  auto& jg = r["gamma"];
  jg["beta"] = cfg.gamma.beta;
  jg["t"] = cfg.gamma.t;
  jg["dt"] = cfg.gamma.dt;
  jg["grid"] = cfg.gamma.grid;
  jg["replicas"] = cfg.gamma.replicas;
  jg["source"] = cfg.gamma.source;
  r["output"] = {{"directory", cfg.output.directory}, {"formats", cfg.output.formats}};
  cfg.resolved = std::move(r);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {},
                                    std::optional<std::uint64_t> seed_override = std::nullopt,
                                    std::optional<std::string> out_override = std::nullopt) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw InvalidSpec("config: cannot read '" + path + "'");
  } catch (const YAML::Exception& e) {
    throw InvalidSpec("config: " + path + ": " + e.what());
  }
  return parse_config(root, overrides, seed_override, out_override);
}

/// Hash of the resolved config, excluding the output directory.
inline std::string config_hash(const ExperimentConfig& cfg) {
  auto copy = cfg.resolved;
  copy.erase("output");
  return detail::hex64(detail::fnv1a(copy.dump()));
}

}  // namespace tubewalk
