#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "rcflow/flowedit.hpp"
#include "rcflow/stackfile.hpp"
#include "rcflow/toy_fields.hpp"

namespace rcflow {

/// Rejected configuration; the message names the offending key.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class FieldKind { constant, point, mixture };
enum class MaskSource { ones, zeros, scene, file };

struct ConditionSpec {
  std::vector<double> illum{1.0, 0.0, 0.0, 0.2};
  std::vector<double> agnostic{2.0, 0.5, 0.35};
  std::optional<std::filesystem::path> reference;
  std::optional<std::filesystem::path> structural;

  friend bool operator==(const ConditionSpec&, const ConditionSpec&) = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  Shape shape{2, 1, 16, 16};
  std::size_t steps = 50;
  std::optional<std::vector<double>> knots;
  std::size_t reuse_interval = 10;
  double hf_lambda = 0.5;
  double hf_rho = 0.8;
  bool hf_enabled = true;
  MaskSource mask = MaskSource::ones;
  std::filesystem::path mask_path;
  FieldKind field = FieldKind::point;
  double constant_value = 0.0;
  std::vector<SceneComponent> components;
  ConditionSpec src;
  ConditionSpec tar;
  std::optional<std::filesystem::path> source; // empty: render the source condition
  std::filesystem::path out = "out";
  NoiseMode flowedit_noise = NoiseMode::fresh_per_step;
  std::size_t flowedit_n_avg = 1;
  double equivalence_tol = 1e-6;
  std::vector<std::size_t> sweep_r{1, 2, 5, 10};
  bool check_identity = false;
  double identity_tol = 1e-5;

  Schedule schedule() const { return knots ? Schedule(*knots) : make_uniform_schedule(steps); }
};

/// Raw `key = value` entries in file order.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

inline double parse_real(const std::string& key, const std::string& tok) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v))
    throw ConfigError(key + ": expected a finite real, got '" + tok + "'");
  return v;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& tok) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + tok + "'");
  return v;
}

inline std::vector<double> parse_reals(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& tok : split_ws(value)) out.push_back(parse_real(key, tok));
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

inline double parse_unit(const std::string& key, const std::string& value) {
  const double v = parse_real(key, value);
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key + ": must lie in [0,1], got " + value);
  return v;
}

inline std::size_t parse_positive(const std::string& key, const std::string& value) {
  const auto v = parse_u64(key, value);
  if (v == 0) throw ConfigError(key + ": must be >= 1");
  return static_cast<std::size_t>(v);
}

} // namespace detail

/// Splits config text into entries. `#` starts a comment; blank lines are ignored; keys may not repeat.
inline KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" + body + "'");
    std::string key = detail::trim(std::string_view(body).substr(0, eq));
    std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    for (const auto& [k, v] : kv)
      if (k == key) throw ConfigError(key + ": duplicate key (line " + std::to_string(line_no) + ")");
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

/// Replaces or appends `key`.
inline void override_key(KeyValues& kv, const std::string& key, const std::string& value) {
  for (auto& [k, v] : kv)
    if (k == key) {
      v = value;
      return;
    }
  kv.emplace_back(key, value);
}

/// Builds a validated config. Every key must be known and every value in range; nothing is
/// computed until this succeeds.
inline ExperimentConfig config_from_key_values(const KeyValues& kv) {
  using namespace detail;
  ExperimentConfig cfg;
  bool tar_given = false;
  std::map<std::size_t, SceneComponent> comps;
  static const std::regex component_key(R"(component\.(\d+)\.(weight|offset|seed))");

  auto condition = [&](ConditionSpec& c, const std::string& key, const std::string& member, const std::string& value) {
    if (member == "illum") {
      c.illum = parse_reals(key, value);
      if (c.illum.size() != ToyScene::illum_arity)
        throw ConfigError(key + ": expected " + std::to_string(ToyScene::illum_arity) + " values");
    } else if (member == "agnostic") {
      c.agnostic = parse_reals(key, value);
      if (c.agnostic.size() != ToyScene::agnostic_arity)
        throw ConfigError(key + ": expected " + std::to_string(ToyScene::agnostic_arity) + " values");
    } else if (member == "reference") {
      c.reference = value;
    } else if (member == "structural") {
      c.structural = value;
    } else {
      throw ConfigError(key + ": unknown key");
    }
  };

  for (const auto& [key, value] : kv) {
    std::smatch m;
    if (key == "seed") {
      cfg.seed = parse_u64(key, value);
    } else if (key == "shape") {
      const auto toks = split_ws(value);
      if (toks.size() != 4) throw ConfigError(key + ": expected 4 extents (frames channels height width)");
      cfg.shape = {parse_positive(key, toks[0]), parse_positive(key, toks[1]), parse_positive(key, toks[2]),
                   parse_positive(key, toks[3])};
    } else if (key == "steps") {
      cfg.steps = parse_positive(key, value);
    } else if (key == "knots") {
      cfg.knots = parse_reals(key, value);
      try {
        Schedule check(*cfg.knots);
      } catch (const DomainError& e) {
        throw ConfigError(key + ": " + e.what());
      }
    } else if (key == "reuse_interval") {
      cfg.reuse_interval = parse_positive(key, value);
    } else if (key == "hf_lambda") {
      cfg.hf_lambda = parse_unit(key, value);
    } else if (key == "hf_rho") {
      cfg.hf_rho = parse_unit(key, value);
    } else if (key == "hf_enabled") {
      cfg.hf_enabled = parse_bool(key, value);
    } else if (key == "mask") {
      if (value == "ones") cfg.mask = MaskSource::ones;
      else if (value == "zeros") cfg.mask = MaskSource::zeros;
      else if (value == "scene") cfg.mask = MaskSource::scene;
      else if (!value.empty()) cfg.mask = MaskSource::file, cfg.mask_path = value;
      else throw ConfigError(key + ": expected ones, zeros, scene or a file path");
    } else if (key == "field") {
      if (value == "constant") cfg.field = FieldKind::constant;
      else if (value == "point") cfg.field = FieldKind::point;
      else if (value == "mixture") cfg.field = FieldKind::mixture;
      else throw ConfigError(key + ": expected constant, point or mixture, got '" + value + "'");
    } else if (key == "field.constant") {
      cfg.constant_value = parse_real(key, value);
    } else if (std::regex_match(key, m, component_key)) {
      const std::size_t idx = parse_u64(key, m[1].str());
      auto& c = comps[idx];
      const std::string member = m[2].str();
      if (member == "weight") {
        c.weight = parse_real(key, value);
        if (c.weight < 0.0) throw ConfigError(key + ": must be >= 0");
      } else if (member == "offset") {
        c.offset_scale = parse_real(key, value);
      } else {
        c.offset_seed = parse_u64(key, value);
      }
    } else if (key.starts_with("src.")) {
      condition(cfg.src, key, key.substr(4), value);
    } else if (key.starts_with("tar.")) {
      tar_given = true;
      ConditionSpec scratch;
      condition(scratch, key, key.substr(4), value);
    } else if (key == "source") {
      if (value != "render") cfg.source = value;
    } else if (key == "out") {
      if (value.empty()) throw ConfigError(key + ": empty path");
      cfg.out = value;
    } else if (key == "flowedit.noise") {
      if (value == "fresh") cfg.flowedit_noise = NoiseMode::fresh_per_step;
      else if (value == "fixed") cfg.flowedit_noise = NoiseMode::fixed;
      else throw ConfigError(key + ": expected fresh or fixed, got '" + value + "'");
    } else if (key == "flowedit.n_avg") {
      cfg.flowedit_n_avg = parse_positive(key, value);
    } else if (key == "equivalence.tol") {
      cfg.equivalence_tol = parse_real(key, value);
      if (cfg.equivalence_tol < 0.0) throw ConfigError(key + ": must be >= 0");
    } else if (key == "sweep.r_values") {
      cfg.sweep_r.clear();
      for (const auto& tok : split_ws(value)) cfg.sweep_r.push_back(parse_positive(key, tok));
      if (cfg.sweep_r.empty()) throw ConfigError(key + ": needs at least one value");
    } else if (key == "check_identity") {
      cfg.check_identity = parse_bool(key, value);
    } else if (key == "identity_tol") {
      cfg.identity_tol = parse_real(key, value);
      if (cfg.identity_tol < 0.0) throw ConfigError(key + ": must be >= 0");
    } else {
      throw ConfigError(key + ": unknown key");
    }
  }

  // A tar.* key overrides only its own member; the rest inherits from src.
  cfg.tar = cfg.src;
  if (tar_given)
    for (const auto& [key, value] : kv)
      if (key.starts_with("tar.")) condition(cfg.tar, key, key.substr(4), value);

  const std::size_t n = cfg.knots ? cfg.knots->size() - 1 : cfg.steps;
  if (cfg.reuse_interval > n)
    throw ConfigError("reuse_interval: must be <= the step count N=" + std::to_string(n));
  for (auto r : cfg.sweep_r)
    if (r > n) throw ConfigError("sweep.r_values: " + std::to_string(r) + " exceeds the step count N=" + std::to_string(n));
  if (cfg.flowedit_noise == NoiseMode::fixed && cfg.flowedit_n_avg != 1)
    throw ConfigError("flowedit.n_avg: fixed noise requires n_avg = 1");

  for (std::size_t i = 0; i < comps.size(); ++i)
    if (!comps.contains(i)) throw ConfigError("component." + std::to_string(i) + ".weight: components must be numbered 0..K-1");
  for (const auto& [idx, c] : comps) cfg.components.push_back(c);
  if (cfg.field == FieldKind::mixture) {
    if (cfg.components.empty()) throw ConfigError("component.0.weight: mixture field needs at least one component");
    std::vector<double> w;
    for (const auto& c : cfg.components) w.push_back(c.weight);
    try {
      MixtureDataset::validate_weights(w);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("component.*.weight: ") + e.what());
    }
  } else if (!cfg.components.empty()) {
    throw ConfigError("component.0.weight: components are only valid with field = mixture");
  }
  return cfg;
}

inline ExperimentConfig parse_config(std::string_view text) { return config_from_key_values(parse_key_values(text)); }

} // namespace rcflow
