#pragma once

// One neuron, no dependence block: GP binary regression of the firing rate.

#include <string>
#include <vector>

#include "spikesync/gibbs.hpp"
#include "spikesync/summary.hpp"

namespace spikesync {

class SingleNeuronModel {
public:
  SingleNeuronModel(const SpikeTrainSet& data, std::uint64_t seed)
      : id_(data.neuron_id), spikes_(data.spike_counts()), trials_(static_cast<double>(data.trial_count())) {
    data.validate();
    require(data.trial_count() >= 1 && data.bin_count() >= 1, "single-neuron model needs data");
    neurons_.push_back(init_neuron_state(data, seed, 1));
  }

  std::vector<NeuronGpState>& neurons() { return neurons_; }
  const std::vector<NeuronGpState>& neurons() const { return neurons_; }

  double latent_loglik(std::size_t, const LatentPath& u) const { return bernoulli_loglik_counts(u, spikes_, trials_); }
  void set_latent(std::size_t, LatentPath u) { neurons_[0].latent = std::move(u); }
  void update_dependence(const SamplerConfig&) {}

  std::vector<std::string> parameter_names() const { return hyper_names(id_); }
  void record(DrawRow row) const {
    for (std::size_t i = 0; i < 4; ++i) row[static_cast<Eigen::Index>(i)] = neurons_[0].hyper[i];
  }
  std::size_t accepted() const { return 0; }
  std::size_t proposals() const { return 0; }

private:
  std::string id_;
  Eigen::VectorXd spikes_;
  double trials_;
  std::vector<NeuronGpState> neurons_;
};

struct RateSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd lo; // 2.5% pointwise quantile
  Eigen::VectorXd hi; // 97.5%
};

inline RateSummary summarize_rates(const Eigen::MatrixXd& rate_draws) {
  require(rate_draws.rows() > 0, "summarize_rates: no draws");
  RateSummary s;
  const Eigen::Index bins = rate_draws.cols();
  s.mean = rate_draws.colwise().mean().transpose();
  s.lo.resize(bins);
  s.hi.resize(bins);
  for (Eigen::Index t = 0; t < bins; ++t) {
    const Interval iv = equal_tailed_interval(column(rate_draws, t));
    s.lo[t] = iv.lo;
    s.hi[t] = iv.hi;
  }
  return s;
}

struct SingleFitResult {
  ChainOutput chain;
  RateSummary rate;
};

inline SingleFitResult fit_single(const SpikeTrainSet& data, SamplerConfig cfg) {
  cfg.store_rates = true;
  SingleNeuronModel model(data, cfg.seed);
  SingleFitResult res;
  res.chain = run_chain(model, cfg);
  res.rate = summarize_rates(res.chain.rate_draws.front());
  return res;
}

} // namespace spikesync
