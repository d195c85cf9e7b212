#pragma once

// Replicate-based power and sensitivity studies for the pairwise synchrony
// test. Cells are (trials, effect, noise); replicate k of cell c uses the
// seed split_seed(split_seed(seed, c), k), so the report does not depend on
// the thread count or scheduling.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spikesync/errors.hpp"
#include "spikesync/gibbs.hpp"
#include "spikesync/pairwise.hpp"
#include "spikesync/parallel.hpp"
#include "spikesync/random.hpp"
#include "spikesync/scenario.hpp"
#include "spikesync/simulate.hpp"

namespace spikesync {

struct ExperimentSpec {
  ScenarioSpec base;
  std::vector<Eigen::Index> trials{20, 30, 40};
  std::vector<double> effects{1.0};  // zeta, or b1 for regression-pair
  std::vector<double> noise{0.0};
  std::size_t replicates = 240;
  SamplerConfig sampler;

  void validate() const {
    require(base.kind == ScenarioKind::RegressionPair || is_pair_kind(base.kind),
            "scenario.kind: experiments need a pair scenario");
    require(!trials.empty() && !effects.empty() && !noise.empty(), "grid: trials, effects and noise must be nonempty");
    require(replicates >= 1, "replicates: must be >= 1");
    for (auto r : trials) require(r >= 1, "trials: every entry must be >= 1");
    for (double n : noise) require(n >= 0.0 && n <= 0.1, "noise: every entry must lie in [0, 0.1]");
    for (double e : effects) cell_scenario(trials.front(), e).validate();
    sampler.validate();
  }

  ScenarioSpec cell_scenario(Eigen::Index r, double effect) const {
    ScenarioSpec s = base;
    s.trials = r;
    if (s.kind == ScenarioKind::RegressionPair) s.b1 = effect;
    else s.zeta = effect;
    return s;
  }
};

struct ExperimentRow {
  std::string scenario;
  Eigen::Index trials = 0;
  double effect = 0.0;
  double noise = 0.0;
  std::size_t replicates = 0;
  std::size_t rejections = 0;

  double rejection_rate() const { return replicates == 0 ? 0.0 : static_cast<double>(rejections) / static_cast<double>(replicates); }
  /// Binomial standard error of the rejection rate.
  double standard_error() const {
    const double p = rejection_rate();
    return replicates == 0 ? 0.0 : std::sqrt(p * (1.0 - p) / static_cast<double>(replicates));
  }
};

struct ExperimentReport {
  std::vector<ExperimentRow> rows;
  double seconds = 0.0;

  const ExperimentRow& find(Eigen::Index trials, double effect, double noise = 0.0) const {
    for (const auto& r : rows)
      if (r.trials == trials && std::abs(r.effect - effect) < 1e-12 && std::abs(r.noise - noise) < 1e-12) return r;
    throw ValidationError("experiment report has no row for the requested setting");
  }

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "scenario,R,zeta_or_b1,noise,replicates,rejection_rate\n";
    for (const auto& r : rows)
      os << r.scenario << ',' << r.trials << ',' << r.effect << ',' << r.noise << ',' << r.replicates << ','
         << r.rejection_rate() << '\n';
    return os.str();
  }
};

/// Simulate, optionally flip bins, fit, and apply the synchrony decision.
inline bool run_replicate(const ScenarioSpec& scenario, double noise, const SamplerConfig& base_cfg, std::uint64_t seed) {
  Rng data_rng = make_stream(seed, 0);
  Ensemble e = simulate_scenario(scenario, data_rng);
  if (noise > 0.0) {
    Rng noise_rng = make_stream(seed, 1);
    for (auto& n : e.neurons) n = sensitivity_noise(n, noise, noise_rng);
  }
  SamplerConfig cfg = base_cfg;
  cfg.seed = split_seed(seed, 2);
  cfg.threads = 1;
  cfg.store_rates = false;
  cfg.lag_posterior_stride = 0;
  const PairFitResult fit = fit_pair(e.neurons[0], e.neurons[1], cfg);
  return fit.significant;
}

/// Runs every cell of the grid. `threads` workers share the replicate queue.
inline ExperimentReport run_experiment(const ExperimentSpec& spec, std::uint64_t seed, std::size_t threads) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  struct Cell {
    Eigen::Index trials;
    double effect, noise;
  };
  std::vector<Cell> cells;
  for (auto r : spec.trials)
    for (double e : spec.effects)
      for (double n : spec.noise) cells.push_back({r, e, n});

  const std::size_t reps = spec.replicates;
  std::vector<unsigned char> decisions(cells.size() * reps, 0);
  parallel_for(decisions.size(), threads, [&](std::size_t job) {
    const std::size_t c = job / reps;
    const std::size_t k = job % reps;
    const std::uint64_t rep_seed = split_seed(split_seed(seed, c), k);
    decisions[job] = run_replicate(spec.cell_scenario(cells[c].trials, cells[c].effect), cells[c].noise, spec.sampler, rep_seed) ? 1 : 0;
  });

  ExperimentReport rep;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    ExperimentRow row;
    row.scenario = spec.base.name;
    row.trials = cells[c].trials;
    row.effect = cells[c].effect;
    row.noise = cells[c].noise;
    row.replicates = reps;
    for (std::size_t k = 0; k < reps; ++k) row.rejections += decisions[c * reps + k];
    rep.rows.push_back(row);
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

/// Sync or regression power grid over trials x effects, no noise.
inline ExperimentReport power_experiment(ExperimentSpec spec, std::uint64_t seed, std::size_t threads) {
  spec.noise = {0.0};
  return run_experiment(spec, seed, threads);
}

/// Sensitivity grid: trials x noise at the scenario's own zeta.
inline ExperimentReport sensitivity_experiment(ExperimentSpec spec, std::uint64_t seed, std::size_t threads) {
  spec.effects = {spec.base.kind == ScenarioKind::RegressionPair ? spec.base.b1 : spec.base.zeta};
  return run_experiment(spec, seed, threads);
}

/// Default grids of the studies.
inline ExperimentSpec default_power_spec() {
  ExperimentSpec s;
  s.base = preset("power-sync");
  s.sampler.max_lag = 0; // lag-0 generators
  s.trials = {20, 30, 40};
  s.effects = {1.0, 1.2, 1.4, 1.6};
  return s;
}

inline ExperimentSpec default_regression_spec() {
  ExperimentSpec s;
  s.base = preset("power-regression");
  s.sampler.max_lag = 0; // lag-0 generators
  s.trials = {20, 30, 40};
  s.effects = {0.0, 0.05, 0.1, 0.15, 0.2};
  return s;
}

inline ExperimentSpec default_sensitivity_spec() {
  ExperimentSpec s;
  s.base = preset("sensitivity");
  s.sampler.max_lag = 0; // lag-0 generators
  s.trials = {20, 30, 40, 50};
  s.noise = {0.0, 0.02, 0.04, 0.06, 0.08, 0.1};
  return s;
}

} // namespace spikesync
