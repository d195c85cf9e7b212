#pragma once

// Declarative simulation scenarios and the named presets.

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spikesync/copula.hpp"
#include "spikesync/errors.hpp"
#include "spikesync/random.hpp"
#include "spikesync/simulate.hpp"
#include "spikesync/spike_data.hpp"

namespace spikesync {

enum class ScenarioKind { SingleNeuron, IndependentPair, ExactSyncPair, LaggedPair, RegressionPair, CopulaMulti };

inline const char* to_string(ScenarioKind k) {
  switch (k) {
  case ScenarioKind::SingleNeuron: return "single-neuron";
  case ScenarioKind::IndependentPair: return "independent-pair";
  case ScenarioKind::ExactSyncPair: return "exact-sync-pair";
  case ScenarioKind::LaggedPair: return "lagged-pair";
  case ScenarioKind::RegressionPair: return "regression-pair";
  case ScenarioKind::CopulaMulti: return "copula-multi";
  }
  return "?";
}

inline ScenarioKind scenario_kind_from_string(const std::string& s) {
  for (auto k : {ScenarioKind::SingleNeuron, ScenarioKind::IndependentPair, ScenarioKind::ExactSyncPair,
                 ScenarioKind::LaggedPair, ScenarioKind::RegressionPair, ScenarioKind::CopulaMulti})
    if (s == to_string(k)) return k;
  throw ValidationError("kind: unknown scenario kind '" + s + "'");
}

inline bool is_pair_kind(ScenarioKind k) {
  return k == ScenarioKind::IndependentPair || k == ScenarioKind::ExactSyncPair || k == ScenarioKind::LaggedPair;
}

struct ScenarioSpec {
  std::string name = "custom";
  ScenarioKind kind = ScenarioKind::IndependentPair;
  std::vector<RateFunction> rates; // p (and q), or one per neuron for copula-multi
  double zeta = 1.0;
  std::map<int, double> lag_distribution{{0, 1.0}};
  bool rate_b_follows_lag = false;
  double b0 = 0.2;
  double b1 = 0.0;
  Eigen::VectorXd beta; // copula-multi, pairs in row-major upper-triangle order
  Eigen::Index trials = 40;
  TimeGrid grid;
  std::uint64_t seed = 1;

  std::size_t neuron_count() const {
    switch (kind) {
    case ScenarioKind::SingleNeuron: return 1;
    case ScenarioKind::CopulaMulti: return rates.size();
    default: return 2;
    }
  }

  /// Checks shapes and ranges; messages start with the offending field.
  void validate() const {
    require(trials >= 1, "trials: must be >= 1");
    require(grid.bins >= 1, "bins: must be >= 1");
    require(grid.width > 0.0, "bin_width: must be positive");
    const Eigen::VectorXd t = grid.centers();
    auto check_rate = [&](const RateFunction& f, const std::string& field) {
      require(!f.terms.empty(), field + ": rate function has no terms");
      for (Eigen::Index k = 0; k < t.size(); ++k) {
        const double v = f(t[k]);
        require(v > 0.0 && v < 1.0, field + ": rate " + std::to_string(v) + " at t=" + std::to_string(t[k]) + " is outside (0, 1)");
      }
    };
    switch (kind) {
    case ScenarioKind::SingleNeuron:
    case ScenarioKind::RegressionPair:
      require(rates.size() == 1, "rates: " + std::string(to_string(kind)) + " takes exactly one rate function");
      check_rate(rates[0], "rates[0]");
      if (kind == ScenarioKind::RegressionPair)
        require(b0 >= 0.0 && b0 <= 1.0 && b0 + b1 >= 0.0 && b0 + b1 <= 1.0, "b1: b0 + b1 * y must lie in [0, 1]");
      break;
    case ScenarioKind::CopulaMulti:
      require(rates.size() >= 2 && rates.size() <= 12, "rates: copula-multi takes 2 to 12 rate functions");
      for (std::size_t i = 0; i < rates.size(); ++i) check_rate(rates[i], "rates[" + std::to_string(i) + "]");
      require(beta.size() == static_cast<Eigen::Index>(pair_count(rates.size())), "beta: length must be n(n-1)/2");
      require(beta_feasible(beta), "beta: sum of |beta| exceeds 1");
      break;
    default:
      require(rates.size() == 2, "rates: pair scenarios take exactly two rate functions");
      check_rate(rates[0], "rates[0]");
      check_rate(rates[1], "rates[1]");
      require(zeta >= 0.0, "zeta: must be nonnegative");
      validate_lag_distribution(lag_distribution, grid.bins);
      break;
    }
  }

  PairDesign pair_design() const {
    PairDesign d;
    d.rate_a = rates.at(0);
    d.rate_b = rates.at(1);
    d.zeta = zeta;
    d.lag_distribution = lag_distribution;
    d.rate_b_follows_lag = rate_b_follows_lag;
    d.trials = trials;
    d.grid = grid;
    return d;
  }
};

/// Draws one data set. Neuron ids are n1, n2, ...
template <class R>
Ensemble simulate_scenario(const ScenarioSpec& spec, R& rng) {
  spec.validate();
  Ensemble e;
  e.condition_label = spec.name;
  switch (spec.kind) {
  case ScenarioKind::SingleNeuron:
    e.neurons.push_back(simulate_single(spec.rates[0], spec.trials, spec.grid, rng, "n1"));
    break;
  case ScenarioKind::RegressionPair: {
    auto [a, b] = simulate_regression_pair(spec.b0, spec.b1, spec.rates[0], spec.trials, spec.grid, rng);
    e.neurons = {std::move(a), std::move(b)};
    break;
  }
  case ScenarioKind::CopulaMulti:
    e = simulate_copula(spec.rates, spec.beta, spec.trials, spec.grid, rng);
    e.condition_label = spec.name;
    break;
  default: {
    auto [a, b] = simulate_pair(spec.pair_design(), rng);
    e.neurons = {std::move(a), std::move(b)};
    break;
  }
  }
  if (spec.kind != ScenarioKind::CopulaMulti)
    for (std::size_t i = 0; i < e.neurons.size(); ++i) e.neurons[i].neuron_id = "n" + std::to_string(i + 1);
  return e;
}

// ---------------------------------------------------------------------------
// Presets

inline std::vector<std::string> preset_names() {
  return {"smooth-rate", "scenario1", "scenario2", "scenario3", "power-sync", "power-regression", "sensitivity", "triplet"};
}

inline ScenarioSpec preset(const std::string& name) {
  constexpr double pi = std::numbers::pi;
  ScenarioSpec s;
  s.name = name;
  const TimeGrid unit{100, 0.0, 0.01};
  const TimeGrid short_grid{20, 0.0, 0.01};
  auto cos_rate = [](double c, double amp, double freq) { return RateFunction::constant(c).plus_cos(amp, freq); };
  auto sin_rate = [](double c, double amp, double freq) { return RateFunction::constant(c).plus_sin(amp, freq); };
  if (name == "smooth-rate") {
    // (4 + 3 sin(3 pi t)) / 20
    s.kind = ScenarioKind::SingleNeuron;
    s.rates = {sin_rate(0.2, 0.15, 3.0 * pi)};
    s.grid = unit;
  } else if (name == "scenario1") {
    s.kind = ScenarioKind::IndependentPair;
    s.rates = {cos_rate(0.25, -0.1, 2.0 * pi), RateFunction::constant(0.15).plus_linear(0.2)};
    s.grid = unit;
  } else if (name == "scenario2") {
    s.kind = ScenarioKind::ExactSyncPair;
    s.rates = {cos_rate(0.25, -0.1, 2.0 * pi), cos_rate(0.25, -0.1, 2.0 * pi)};
    s.zeta = 1.6;
    s.grid = unit;
  } else if (name == "scenario3") {
    s.kind = ScenarioKind::LaggedPair;
    s.rates = {sin_rate(0.25, 0.1, 2.0 * pi), sin_rate(0.25, 0.1, 2.0 * pi)};
    s.zeta = 1.6;
    s.lag_distribution = {{3, 0.2}, {4, 0.5}, {5, 0.3}};
    s.rate_b_follows_lag = true;
    s.grid = unit;
  } else if (name == "power-sync") {
    s.kind = ScenarioKind::ExactSyncPair;
    s.rates = {cos_rate(0.2, -0.1, 12.0 * pi), cos_rate(0.2, -0.1, 12.0 * pi)};
    s.zeta = 1.0;
    s.grid = short_grid;
  } else if (name == "power-regression") {
    s.kind = ScenarioKind::RegressionPair;
    s.rates = {cos_rate(0.25, -0.1, 12.0 * pi)};
    s.b0 = 0.2;
    s.b1 = 0.0;
    s.grid = short_grid;
  } else if (name == "sensitivity") {
    s.kind = ScenarioKind::ExactSyncPair;
    s.rates = {cos_rate(0.4, 0.1, 12.0), cos_rate(0.4, 0.1, 12.0)};
    s.zeta = 1.2;
    s.grid = short_grid;
  } else if (name == "triplet") {
    s.kind = ScenarioKind::CopulaMulti;
    const RateFunction r = cos_rate(0.25, -0.1, 2.0 * pi);
    s.rates = {r, r, r};
    s.beta = Eigen::Vector3d(0.7, 0.0, 0.0);
    s.grid = unit;
  } else {
    throw ValidationError("scenario: unknown preset '" + name + "'");
  }
  return s;
}

} // namespace spikesync
