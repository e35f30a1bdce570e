#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddkf/combiners.hpp"

namespace ddkf {

inline constexpr std::string_view kVersion = "0.1.0";

/// Full description of a Monte Carlo experiment. Defaults reproduce the
/// shipped two-projectile, 30-node scenario.
struct ExperimentConfig {
  std::size_t n_nodes = 30;
  double comm_radius = 0.35;
  /// Radius of the head-based partition; unset means comm_radius.
  std::optional<double> head_radius;
  std::size_t min_degree = 4;
  std::size_t n_trials = 200;
  std::size_t n_iterations = 100;
  double delta = 0.1;
  double g = 10.0;
  double x0 = 1.0;
  double y0 = 30.0;
  double v0 = 15.0;
  std::vector<double> angles{std::numbers::pi / 3.0, std::numbers::pi / 4.0};
  double sigma_min = 0.01;
  double sigma_span = 0.5;
  double G_scale = 0.625;
  double Q_scale = 0.001;
  double P0_scale = 1.0;
  Policy policy = Policy::kAdaptive;
  double eps = 1e-12;
  double prune_tau = 0.05;
  std::size_t prune_window = 10;
  bool pruning_enabled = true;
  /// Node m folds in neighbor n's measurement only when a_nm >= adapt_gate.
  double adapt_gate = 0.05;
  /// Redraw the partition until both clusters induce connected subgraphs.
  bool require_connected_clusters = true;
  bool filter_knows_gravity = true;
  std::uint64_t seed = 1;

  [[nodiscard]] double resolved_head_radius() const { return head_radius.value_or(comm_radius); }
};

class ConfigError : public std::runtime_error {
 public:
  enum class Kind { kMissingFile, kParse, kUnknownKey, kInvariant };

  ConfigError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] Kind kind() const noexcept { return kind_; }

  /// Process exit code for this failure.
  [[nodiscard]] int exit_code() const noexcept {
    switch (kind_) {
      case Kind::kMissingFile: return 4;
      case Kind::kParse: return 2;
      case Kind::kUnknownKey: return 5;
      case Kind::kInvariant: return 6;
    }
    return 2;
  }

 private:
  Kind kind_;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] inline void parse_fail(const std::string& key, const std::string& value,
                                    const char* expected) {
  throw ConfigError(ConfigError::Kind::kParse,
                    "config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) parse_fail(key, v, "a number");
  return out;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) parse_fail(key, v, "a non-negative integer");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  parse_fail(key, v, "a boolean");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::string body = v;
  if (!body.empty() && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
  std::vector<double> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  return out;
}

}  // namespace detail

/// Applies one key/value pair (value in its textual form).
inline void set_config_value(ExperimentConfig& cfg, const std::string& key,
                             const std::string& value) {
  using namespace detail;
  if (key == "n_nodes") cfg.n_nodes = parse_u64(key, value);
  else if (key == "comm_radius") cfg.comm_radius = parse_double(key, value);
  else if (key == "head_radius") cfg.head_radius = parse_double(key, value);
  else if (key == "min_degree") cfg.min_degree = parse_u64(key, value);
  else if (key == "n_trials") cfg.n_trials = parse_u64(key, value);
  else if (key == "n_iterations") cfg.n_iterations = parse_u64(key, value);
  else if (key == "delta") cfg.delta = parse_double(key, value);
  else if (key == "g") cfg.g = parse_double(key, value);
  else if (key == "x0") cfg.x0 = parse_double(key, value);
  else if (key == "y0") cfg.y0 = parse_double(key, value);
  else if (key == "v0") cfg.v0 = parse_double(key, value);
  else if (key == "angles") cfg.angles = parse_list(key, value);
  else if (key == "sigma_min") cfg.sigma_min = parse_double(key, value);
  else if (key == "sigma_span") cfg.sigma_span = parse_double(key, value);
  else if (key == "G_scale") cfg.G_scale = parse_double(key, value);
  else if (key == "Q_scale") cfg.Q_scale = parse_double(key, value);
  else if (key == "P0_scale") cfg.P0_scale = parse_double(key, value);
  else if (key == "policy") {
    const auto p = parse_policy(value);
    if (!p) parse_fail(key, value, "one of uniform, metropolis, relvar, adaptive");
    cfg.policy = *p;
  } else if (key == "eps") cfg.eps = parse_double(key, value);
  else if (key == "prune_tau") cfg.prune_tau = parse_double(key, value);
  else if (key == "prune_window") cfg.prune_window = parse_u64(key, value);
  else if (key == "pruning_enabled") cfg.pruning_enabled = parse_bool(key, value);
  else if (key == "adapt_gate") cfg.adapt_gate = parse_double(key, value);
  else if (key == "require_connected_clusters") cfg.require_connected_clusters = parse_bool(key, value);
  else if (key == "filter_knows_gravity") cfg.filter_knows_gravity = parse_bool(key, value);
  else if (key == "seed") cfg.seed = parse_u64(key, value);
  else throw ConfigError(ConfigError::Kind::kUnknownKey, "unknown config key '" + key + "'");
}

/// Throws ConfigError(kInvariant) naming the first violated constraint.
inline void validate(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError(ConfigError::Kind::kInvariant, msg); };
  auto finite_positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (cfg.n_nodes == 0) fail("n_nodes must be positive");
  if (cfg.n_trials == 0) fail("n_trials must be positive");
  if (cfg.n_iterations == 0) fail("n_iterations must be positive");
  if (cfg.prune_window == 0) fail("prune_window must be positive");
  if (!finite_positive(cfg.comm_radius) || cfg.comm_radius > std::sqrt(2.0))
    fail("comm_radius must lie in (0, sqrt(2)]");
  if (cfg.head_radius && !(std::isfinite(*cfg.head_radius) && *cfg.head_radius >= 0.0))
    fail("head_radius must be non-negative");
  if (!finite_positive(cfg.delta)) fail("delta must be positive");
  if (!(std::isfinite(cfg.g) && cfg.g >= 0.0)) fail("g must be non-negative");
  if (!(std::isfinite(cfg.sigma_min) && cfg.sigma_min > 0.0)) fail("sigma_min must be positive");
  if (!(std::isfinite(cfg.sigma_span) && cfg.sigma_span >= 0.0)) fail("sigma_span must be non-negative");
  if (!(std::isfinite(cfg.Q_scale) && cfg.Q_scale >= 0.0)) fail("Q_scale must be non-negative");
  if (!std::isfinite(cfg.G_scale)) fail("G_scale must be finite");
  if (!finite_positive(cfg.P0_scale)) fail("P0_scale must be positive");
  if (!finite_positive(cfg.eps)) fail("eps must be positive");
  if (!(std::isfinite(cfg.prune_tau) && cfg.prune_tau >= 0.0)) fail("prune_tau must be non-negative");
  if (!(std::isfinite(cfg.adapt_gate) && cfg.adapt_gate >= 0.0 && cfg.adapt_gate <= 1.0))
    fail("adapt_gate must lie in [0, 1]");
  if (cfg.angles.size() != 2) fail("angles must list exactly 2 targets");
  for (double a : cfg.angles)
    if (!std::isfinite(a)) fail("angles must be finite");
  for (double v : {cfg.x0, cfg.y0, cfg.v0})
    if (!std::isfinite(v)) fail("initial position and speed must be finite");
}

/// Parses either a flat `key = value` document (# starts a comment) or a
/// JSON object. A JSON object holding a "config" member (as written to
/// run_meta.json) is read from that member.
[[nodiscard]] inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(ConfigError::Kind::kParse, std::string("config JSON: ") + e.what());
    }
    const nlohmann::json& body = doc.contains("config") ? doc.at("config") : doc;
    if (!body.is_object()) throw ConfigError(ConfigError::Kind::kParse, "config JSON must be an object");
    for (const auto& [key, value] : body.items()) {
      std::string textual;
      if (value.is_string()) textual = value.get<std::string>();
      else if (value.is_array()) {
        for (std::size_t i = 0; i < value.size(); ++i) textual += (i ? "," : "") + value[i].dump();
      } else textual = value.dump();
      set_config_value(cfg, key, textual);
    }
  } else {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      const std::string t = detail::trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(ConfigError::Kind::kParse,
                          "config line " + std::to_string(lineno) + ": expected 'key = value'");
      }
      set_config_value(cfg, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    }
  }
  validate(cfg);
  return cfg;
}

[[nodiscard]] inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(ConfigError::Kind::kMissingFile, "cannot open config file " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Resolved configuration as a JSON object; parse_config accepts it back.
[[nodiscard]] inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["n_nodes"] = cfg.n_nodes;
  j["comm_radius"] = cfg.comm_radius;
  j["head_radius"] = cfg.resolved_head_radius();
  j["min_degree"] = cfg.min_degree;
  j["n_trials"] = cfg.n_trials;
  j["n_iterations"] = cfg.n_iterations;
  j["delta"] = cfg.delta;
  j["g"] = cfg.g;
  j["x0"] = cfg.x0;
  j["y0"] = cfg.y0;
  j["v0"] = cfg.v0;
  j["angles"] = cfg.angles;
  j["sigma_min"] = cfg.sigma_min;
  j["sigma_span"] = cfg.sigma_span;
  j["G_scale"] = cfg.G_scale;
  j["Q_scale"] = cfg.Q_scale;
  j["P0_scale"] = cfg.P0_scale;
  j["policy"] = std::string(policy_name(cfg.policy));
  j["eps"] = cfg.eps;
  j["prune_tau"] = cfg.prune_tau;
  j["prune_window"] = cfg.prune_window;
  j["pruning_enabled"] = cfg.pruning_enabled;
  j["adapt_gate"] = cfg.adapt_gate;
  j["require_connected_clusters"] = cfg.require_connected_clusters;
  j["filter_knows_gravity"] = cfg.filter_knows_gravity;
  j["seed"] = cfg.seed;
  return j;
}

}  // namespace ddkf
