#pragma once

// Gibbs orchestration shared by all models: latent paths by elliptical slice
// sampling, GP hyperparameters by coordinate-wise slice sampling, then the
// model's dependence block.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spikesync/errors.hpp"
#include "spikesync/gp.hpp"
#include "spikesync/parallel.hpp"
#include "spikesync/random.hpp"
#include "spikesync/samplers/ball_maps.hpp"
#include "spikesync/samplers/ess.hpp"
#include "spikesync/samplers/slice.hpp"
#include "spikesync/samplers/spherical_hmc.hpp"

namespace spikesync {

/// One kept row of the draws matrix (column-major storage, so strided).
using DrawRow = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

struct SamplerConfig {
  std::size_t burn_in = 1000;
  std::size_t draws = 2000;
  std::size_t thin = 1;

  std::size_t ess_steps = 1;        // per neuron per sweep
  std::size_t hyper_sweeps = 1;     // coordinate sweeps per neuron per sweep
  SliceOptions hyper_slice{1.0, 50};
  double hyperprior_sd = 3.0;

  std::size_t dependence_steps = 1; // zeta/lag updates or HMC transitions per sweep
  HmcConfig hmc{0.05, 10};
  BallMap ball_map;                 // L1 ball <-> L2 ball for the copula block
  SliceOptions zeta_slice{0.25, 50};
  int max_lag = 10;
  std::size_t lag_posterior_stride = 5; // 0 disables the lag posterior

  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool store_rates = true;

  void validate() const {
    require(draws >= 1, "sampler: draws must be >= 1");
    require(thin >= 1, "sampler: thin must be >= 1");
    require(hyper_slice.width > 0.0, "sampler: slice_width must be positive");
    require(zeta_slice.width > 0.0, "sampler: zeta_slice_width must be positive");
    require(hmc.step_size > 0.0, "sampler: hmc step_size must be positive");
    require(hmc.leapfrog_steps >= 1, "sampler: hmc leapfrog_steps must be >= 1");
    require(max_lag >= 0, "sampler: max_lag must be >= 0");
    require(ball_map.scale > 0.0, "sampler: ball_map scale must be positive");
    require(hyperprior_sd > 0.0, "sampler: hyperprior_sd must be positive");
  }
};

/// GP block of one neuron. Each neuron owns its random stream so the
/// per-neuron updates give the same result in any execution order.
struct NeuronGpState {
  Eigen::VectorXd t_grid;
  GpHyperParams hyper;
  CovFactor cov;
  LatentPath latent;
  Rng rng;
};

/// Latents start at the logit of the pooled firing rate, hyperparameter logs at 0.
inline NeuronGpState init_neuron_state(const SpikeTrainSet& data, std::uint64_t seed, std::uint64_t stream) {
  NeuronGpState s;
  s.t_grid = data.t_grid;
  s.cov = build_covariance(s.t_grid, s.hyper);
  const double total = static_cast<double>(data.trial_count() * data.bin_count());
  const double rate = (data.spike_counts().sum() + 0.5) / (total + 1.0);
  s.latent = LatentPath::Constant(data.bin_count(), logit(std::clamp(rate, 1e-3, 1.0 - 1e-3)));
  s.rng = make_stream(seed, stream);
  return s;
}

/// log p(u | theta) + log p(theta), -inf where the covariance cannot be factorized.
inline double hyper_log_posterior(const NeuronGpState& s, const GpHyperParams& h, double prior_sd) {
  if (!h.finite()) return -std::numeric_limits<double>::infinity();
  try {
    const CovFactor f = build_covariance(s.t_grid, h);
    return gp_log_prior(s.latent, f) + hyperprior_logdensity(h, prior_sd);
  } catch (const NumericalError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

inline void update_hyperparameters(NeuronGpState& s, const SamplerConfig& cfg) {
  Eigen::VectorXd x(4);
  for (std::size_t i = 0; i < 4; ++i) x[static_cast<Eigen::Index>(i)] = s.hyper[i];
  auto target = [&](const Eigen::VectorXd& y) {
    GpHyperParams h;
    for (std::size_t i = 0; i < 4; ++i) h[i] = y[static_cast<Eigen::Index>(i)];
    return hyper_log_posterior(s, h, cfg.hyperprior_sd);
  };
  x = slice_step(x, target, cfg.hyper_slice, s.rng);
  for (std::size_t i = 0; i < 4; ++i) s.hyper[i] = x[static_cast<Eigen::Index>(i)];
  s.cov = build_covariance(s.t_grid, s.hyper);
}

struct BlockTimings {
  double latent_seconds = 0.0;
  double hyper_seconds = 0.0;
  double dependence_seconds = 0.0;
};

namespace detail {
class Stopwatch {
public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};
} // namespace detail

/// Models plug into the sweep through:
///   std::vector<NeuronGpState>& neurons();
///   double latent_loglik(std::size_t i, const LatentPath& u) const;  // others held fixed
///   void set_latent(std::size_t i, LatentPath u);
///   void update_dependence(const SamplerConfig& cfg);
template <class Model>
void gibbs_sweep(Model& model, const SamplerConfig& cfg, BlockTimings* timings = nullptr) {
  auto& neurons = model.neurons();

  detail::Stopwatch latent_clock;
  // Latent updates stay sequential: the likelihood couples the neurons.
  for (std::size_t i = 0; i < neurons.size(); ++i) {
    for (std::size_t s = 0; s < cfg.ess_steps; ++s) {
      auto loglik = [&](const LatentPath& u) { return model.latent_loglik(i, u); };
      EssState st{neurons[i].latent, loglik(neurons[i].latent)};
      st = ess_step(st, neurons[i].cov, loglik, neurons[i].rng);
      model.set_latent(i, std::move(st.u));
    }
  }
  if (timings) timings->latent_seconds += latent_clock.seconds();

  detail::Stopwatch hyper_clock;
  if (cfg.hyper_sweeps > 0) {
    parallel_for(neurons.size(), cfg.threads, [&](std::size_t i) {
      for (std::size_t s = 0; s < cfg.hyper_sweeps; ++s) update_hyperparameters(neurons[i], cfg);
    });
  }
  if (timings) timings->hyper_seconds += hyper_clock.seconds();

  detail::Stopwatch dep_clock;
  for (std::size_t s = 0; s < cfg.dependence_steps; ++s) model.update_dependence(cfg);
  if (timings) timings->dependence_seconds += dep_clock.seconds();
}

struct ChainOutput {
  std::vector<std::string> names;
  Eigen::MatrixXd draws; // kept iterations x parameters
  std::size_t accepted = 0;
  std::size_t proposals = 0;
  BlockTimings timings;
  std::vector<Eigen::MatrixXd> rate_draws; // per neuron: kept iterations x bins

  double acceptance_rate() const {
    return proposals == 0 ? 1.0 : static_cast<double>(accepted) / static_cast<double>(proposals);
  }

  Eigen::Index index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<Eigen::Index>(i);
    throw ValidationError("chain has no parameter named '" + name + "'");
  }

  std::vector<double> samples(const std::string& name) const;
};

inline std::vector<double> ChainOutput::samples(const std::string& name) const {
  const Eigen::Index c = index_of(name);
  std::vector<double> out(static_cast<std::size_t>(draws.rows()));
  for (Eigen::Index r = 0; r < draws.rows(); ++r) out[static_cast<std::size_t>(r)] = draws(r, c);
  return out;
}

/// One header row of parameter names, then one row per kept draw.
inline std::string chain_to_csv(const ChainOutput& c) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration";
  for (const auto& n : c.names) os << ',' << n;
  os << '\n';
  for (Eigen::Index r = 0; r < c.draws.rows(); ++r) {
    os << r;
    for (Eigen::Index k = 0; k < c.draws.cols(); ++k) os << ',' << c.draws(r, k);
    os << '\n';
  }
  return os.str();
}

/// Names of the hyperparameter columns for neuron `id`.
inline std::vector<std::string> hyper_names(const std::string& id) {
  std::vector<std::string> out;
  for (const char* n : GpHyperParams::names) out.push_back(id + "." + n);
  return out;
}

/// Runs burn-in plus thinned kept draws. The model supplies
///   std::vector<std::string> parameter_names() const;
///   void record(DrawRow row) const;
///   std::size_t accepted() const; std::size_t proposals() const;  // dependence-block MH counters
/// and optionally `void on_kept_draw()` for running summaries.
template <class Model>
ChainOutput run_chain(Model& model, const SamplerConfig& cfg) {
  cfg.validate();
  ChainOutput out;
  out.names = model.parameter_names();
  out.draws.resize(static_cast<Eigen::Index>(cfg.draws), static_cast<Eigen::Index>(out.names.size()));
  auto& neurons = model.neurons();
  if (cfg.store_rates) {
    for (const auto& n : neurons)
      out.rate_draws.emplace_back(static_cast<Eigen::Index>(cfg.draws), n.latent.size());
  }
  for (std::size_t it = 0; it < cfg.burn_in; ++it) gibbs_sweep(model, cfg, &out.timings);
  const std::size_t acc0 = model.accepted();
  const std::size_t prop0 = model.proposals();
  for (std::size_t k = 0; k < cfg.draws; ++k) {
    for (std::size_t s = 0; s < cfg.thin; ++s) gibbs_sweep(model, cfg, &out.timings);
    const auto row = static_cast<Eigen::Index>(k);
    model.record(out.draws.row(row));
    if (cfg.store_rates)
      for (std::size_t i = 0; i < neurons.size(); ++i) out.rate_draws[i].row(row) = logistic_rate(neurons[i].latent).transpose();
    if constexpr (requires { model.on_kept_draw(); }) model.on_kept_draw();
  }
  out.accepted = model.accepted() - acc0;
  out.proposals = model.proposals() - prop0;
  return out;
}

} // namespace spikesync
