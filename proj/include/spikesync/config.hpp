#pragma once

// Run configuration files. TOML is the primary format and JSON a mirror;
// both are read into one JSON tree and then into the typed structs. Unknown
// keys are rejected with the dotted path of the offending field.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spikesync/errors.hpp"
#include "spikesync/experiments.hpp"
#include "spikesync/gibbs.hpp"
#include "spikesync/scenario.hpp"
#include "spikesync/simulate.hpp"

#ifndef TOML_EXCEPTIONS
#define TOML_EXCEPTIONS 1
#endif
#include <toml.hpp>

namespace spikesync {

using Json = nlohmann::json;

namespace detail {

inline Json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    Json out = Json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    Json out = Json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  throw ValidationError("config: dates and times are not supported");
}

inline void reject_unknown(const Json& obj, const std::string& where, const std::set<std::string>& allowed) {
  require(obj.is_object(), where + ": expected a table");
  for (const auto& [k, v] : obj.items())
    if (!allowed.contains(k)) throw ValidationError((where.empty() ? k : where + "." + k) + ": unknown field");
}

inline std::string path(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

template <class T>
T get_as(const Json& obj, const std::string& where, const std::string& key) {
  const Json& v = obj.at(key);
  try {
    if constexpr (std::is_same_v<T, double>) {
      require(v.is_number(), path(where, key) + ": expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      require(v.is_boolean(), path(where, key) + ": expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      require(v.is_number_integer(), path(where, key) + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) require(v.get<std::int64_t>() >= 0, path(where, key) + ": must be nonnegative");
    } else if constexpr (std::is_same_v<T, std::string>) {
      require(v.is_string(), path(where, key) + ": expected a string");
    }
    return v.get<T>();
  } catch (const Json::exception& e) {
    throw ValidationError(path(where, key) + ": " + e.what());
  }
}

template <class T>
void read_opt(const Json& obj, const std::string& where, const std::string& key, T& out) {
  if (obj.contains(key)) out = get_as<T>(obj, where, key);
}

template <class T>
std::vector<T> read_list(const Json& obj, const std::string& where, const std::string& key) {
  const Json& v = obj.at(key);
  require(v.is_array(), path(where, key) + ": expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    Json wrap = Json::object();
    wrap["x"] = v[i];
    out.push_back(get_as<T>(wrap, path(where, key) + "[" + std::to_string(i) + "]", "x"));
  }
  return out;
}

} // namespace detail

/// Reads a .toml or .json file into a JSON tree.
inline Json load_config_tree(const std::filesystem::path& file) {
  require(std::filesystem::exists(file), "config: file not found: " + file.string());
  const std::string ext = file.extension().string();
  if (ext == ".json") {
    std::ifstream in(file);
    try {
      return Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw ValidationError("config: " + file.string() + ": " + e.what());
    }
  }
  require(ext == ".toml", "config: expected a .toml or .json file, got " + file.string());
  try {
    const toml::table t = toml::parse_file(file.string());
    return detail::toml_to_json(t);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config: " << file.string() << ": " << e.description() << " (line " << e.source().begin.line << ")";
    throw ValidationError(os.str());
  }
}

inline Json parse_toml_string(const std::string& text) {
  try {
    return detail::toml_to_json(toml::parse(text));
  } catch (const toml::parse_error& e) {
    throw ValidationError(std::string("config: ") + std::string(e.description()));
  }
}

// ---------------------------------------------------------------------------
// Sampler

inline SamplerConfig sampler_from_json(const Json& j, SamplerConfig cfg = {}, const std::string& where = "sampler") {
  using detail::read_opt;
  detail::reject_unknown(j, where,
                         {"burn_in", "draws", "thin", "ess_steps", "hyper_sweeps", "slice_width", "slice_max_steps",
                          "hyperprior_sd", "dependence_steps", "hmc_step_size", "hmc_leapfrog_steps", "ball_map",
                          "ball_map_scale", "zeta_slice_width", "max_lag", "lag_posterior_stride", "store_rates"});
  read_opt(j, where, "burn_in", cfg.burn_in);
  read_opt(j, where, "draws", cfg.draws);
  read_opt(j, where, "thin", cfg.thin);
  read_opt(j, where, "ess_steps", cfg.ess_steps);
  read_opt(j, where, "hyper_sweeps", cfg.hyper_sweeps);
  read_opt(j, where, "slice_width", cfg.hyper_slice.width);
  read_opt(j, where, "slice_max_steps", cfg.hyper_slice.max_steps);
  read_opt(j, where, "hyperprior_sd", cfg.hyperprior_sd);
  read_opt(j, where, "dependence_steps", cfg.dependence_steps);
  read_opt(j, where, "hmc_step_size", cfg.hmc.step_size);
  read_opt(j, where, "hmc_leapfrog_steps", cfg.hmc.leapfrog_steps);
  if (j.contains("ball_map")) {
    const auto s = detail::get_as<std::string>(j, where, "ball_map");
    require(s == "smooth" || s == "radial", where + ".ball_map: expected \"smooth\" or \"radial\"");
    cfg.ball_map.kind = s == "smooth" ? BallMap::Kind::Smooth : BallMap::Kind::Radial;
  }
  read_opt(j, where, "ball_map_scale", cfg.ball_map.scale);
  read_opt(j, where, "zeta_slice_width", cfg.zeta_slice.width);
  read_opt(j, where, "max_lag", cfg.max_lag);
  read_opt(j, where, "lag_posterior_stride", cfg.lag_posterior_stride);
  read_opt(j, where, "store_rates", cfg.store_rates);
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
  return cfg;
}

inline Json to_json(const SamplerConfig& c) {
  return Json{{"burn_in", c.burn_in},
              {"draws", c.draws},
              {"thin", c.thin},
              {"ess_steps", c.ess_steps},
              {"hyper_sweeps", c.hyper_sweeps},
              {"slice_width", c.hyper_slice.width},
              {"slice_max_steps", c.hyper_slice.max_steps},
              {"hyperprior_sd", c.hyperprior_sd},
              {"dependence_steps", c.dependence_steps},
              {"hmc_step_size", c.hmc.step_size},
              {"hmc_leapfrog_steps", c.hmc.leapfrog_steps},
              {"ball_map", c.ball_map.kind == BallMap::Kind::Smooth ? "smooth" : "radial"},
              {"ball_map_scale", c.ball_map.scale},
              {"zeta_slice_width", c.zeta_slice.width},
              {"max_lag", c.max_lag},
              {"lag_posterior_stride", c.lag_posterior_stride},
              {"store_rates", c.store_rates}};
}

// ---------------------------------------------------------------------------
// Rate functions: an array of terms
//   {type = "const", coef = 0.25}
//   {type = "linear", coef = 0.2}
//   {type = "sin" | "cos", coef = 0.1, freq = 12.0 | freq_pi = 2.0, phase = 0.0}

inline RateFunction rate_from_json(const Json& j, const std::string& where) {
  require(j.is_array() && !j.empty(), where + ": expected a nonempty array of terms");
  RateFunction f;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    const Json& t = j[i];
    detail::reject_unknown(t, w, {"type", "coef", "freq", "freq_pi", "phase"});
    require(t.contains("type"), w + ".type: missing");
    require(t.contains("coef"), w + ".coef: missing");
    const auto type = detail::get_as<std::string>(t, w, "type");
    RateTerm term;
    term.coef = detail::get_as<double>(t, w, "coef");
    if (type == "const" || type == "linear") {
      require(!t.contains("freq") && !t.contains("freq_pi") && !t.contains("phase"),
              w + ": " + type + " terms take only coef");
      term.kind = type == "const" ? RateTerm::Kind::Const : RateTerm::Kind::Linear;
    } else if (type == "sin" || type == "cos") {
      term.kind = type == "sin" ? RateTerm::Kind::Sin : RateTerm::Kind::Cos;
      require(t.contains("freq") != t.contains("freq_pi"), w + ": give exactly one of freq and freq_pi");
      term.freq = t.contains("freq") ? detail::get_as<double>(t, w, "freq")
                                     : detail::get_as<double>(t, w, "freq_pi") * std::numbers::pi;
      detail::read_opt(t, w, "phase", term.phase);
    } else {
      throw ValidationError(w + ".type: unknown term type '" + type + "'");
    }
    f.terms.push_back(term);
  }
  return f;
}

inline Json to_json(const RateFunction& f) {
  Json out = Json::array();
  for (const auto& t : f.terms) {
    switch (t.kind) {
    case RateTerm::Kind::Const: out.push_back({{"type", "const"}, {"coef", t.coef}}); break;
    case RateTerm::Kind::Linear: out.push_back({{"type", "linear"}, {"coef", t.coef}}); break;
    case RateTerm::Kind::Sin:
    case RateTerm::Kind::Cos:
      out.push_back({{"type", t.kind == RateTerm::Kind::Sin ? "sin" : "cos"}, {"coef", t.coef}, {"freq", t.freq}, {"phase", t.phase}});
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario. `preset` (optional) supplies defaults that the other keys override.

inline ScenarioSpec scenario_from_json(const Json& j, const std::string& where = "scenario") {
  detail::reject_unknown(j, where,
                         {"preset", "name", "kind", "rates", "zeta", "lags", "rate_b_follows_lag", "b0", "b1", "beta",
                          "trials", "bins", "bin_width", "t_start", "seed"});
  ScenarioSpec s;
  if (j.contains("preset")) s = preset(detail::get_as<std::string>(j, where, "preset"));
  detail::read_opt(j, where, "name", s.name);
  if (j.contains("kind")) s.kind = scenario_kind_from_string(detail::get_as<std::string>(j, where, "kind"));
  if (j.contains("rates")) {
    const Json& r = j.at("rates");
    require(r.is_array(), where + ".rates: expected an array of rate functions");
    s.rates.clear();
    for (std::size_t i = 0; i < r.size(); ++i) s.rates.push_back(rate_from_json(r[i], where + ".rates[" + std::to_string(i) + "]"));
  }
  detail::read_opt(j, where, "zeta", s.zeta);
  if (j.contains("lags")) {
    const Json& l = j.at("lags");
    require(l.is_object() && !l.empty(), where + ".lags: expected a table of lag = probability");
    s.lag_distribution.clear();
    for (const auto& [k, v] : l.items()) {
      int lag = 0;
      try {
        std::size_t used = 0;
        lag = std::stoi(k, &used);
        require(used == k.size(), "");
      } catch (const std::exception&) {
        throw ValidationError(where + ".lags." + k + ": lag keys must be integers");
      }
      require(v.is_number(), where + ".lags." + k + ": expected a probability");
      s.lag_distribution[lag] = v.get<double>();
    }
  }
  detail::read_opt(j, where, "rate_b_follows_lag", s.rate_b_follows_lag);
  detail::read_opt(j, where, "b0", s.b0);
  detail::read_opt(j, where, "b1", s.b1);
  if (j.contains("beta")) {
    const auto b = detail::read_list<double>(j, where, "beta");
    s.beta = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  }
  if (j.contains("trials")) s.trials = detail::get_as<std::int64_t>(j, where, "trials");
  if (j.contains("bins")) s.grid.bins = detail::get_as<std::int64_t>(j, where, "bins");
  detail::read_opt(j, where, "bin_width", s.grid.width);
  detail::read_opt(j, where, "t_start", s.grid.start);
  detail::read_opt(j, where, "seed", s.seed);
  try {
    s.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(where + "." + e.what());
  }
  return s;
}

inline Json to_json(const ScenarioSpec& s) {
  Json rates = Json::array();
  for (const auto& r : s.rates) rates.push_back(to_json(r));
  Json lags = Json::object();
  for (const auto& [k, v] : s.lag_distribution) lags[std::to_string(k)] = v;
  Json out{{"name", s.name},
           {"kind", to_string(s.kind)},
           {"rates", rates},
           {"zeta", s.zeta},
           {"lags", lags},
           {"rate_b_follows_lag", s.rate_b_follows_lag},
           {"b0", s.b0},
           {"b1", s.b1},
           {"trials", s.trials},
           {"bins", s.grid.bins},
           {"bin_width", s.grid.width},
           {"t_start", s.grid.start},
           {"seed", s.seed}};
  if (s.beta.size() > 0) out["beta"] = std::vector<double>(s.beta.data(), s.beta.data() + s.beta.size());
  return out;
}

// ---------------------------------------------------------------------------
// Experiment grid: [scenario], [sampler] and [experiment] tables.

inline ExperimentSpec experiment_from_json(const Json& root, ExperimentSpec spec) {
  if (root.contains("scenario")) spec.base = scenario_from_json(root.at("scenario"));
  if (root.contains("sampler")) spec.sampler = sampler_from_json(root.at("sampler"), spec.sampler);
  if (root.contains("experiment")) {
    const Json& e = root.at("experiment");
    const std::string w = "experiment";
    detail::reject_unknown(e, w, {"trials", "effects", "noise", "replicates"});
    if (e.contains("trials")) {
      spec.trials.clear();
      for (auto r : detail::read_list<std::int64_t>(e, w, "trials")) spec.trials.push_back(r);
    }
    if (e.contains("effects")) spec.effects = detail::read_list<double>(e, w, "effects");
    if (e.contains("noise")) spec.noise = detail::read_list<double>(e, w, "noise");
    detail::read_opt(e, w, "replicates", spec.replicates);
  }
  spec.validate();
  return spec;
}

inline Json to_json(const ExperimentSpec& s) {
  std::vector<std::int64_t> trials(s.trials.begin(), s.trials.end());
  return Json{{"scenario", to_json(s.base)},
              {"sampler", to_json(s.sampler)},
              {"experiment", {{"trials", trials}, {"effects", s.effects}, {"noise", s.noise}, {"replicates", s.replicates}}}};
}

} // namespace spikesync
