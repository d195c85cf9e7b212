#pragma once

// Elliptical slice sampling for latent paths with a zero-mean Gaussian prior.

#include <cmath>
#include <cstddef>
#include <limits>

#include <Eigen/Core>

#include "spikesync/errors.hpp"
#include "spikesync/gp.hpp"
#include "spikesync/random.hpp"

namespace spikesync {

struct EssState {
  LatentPath u;
  double loglik = -std::numeric_limits<double>::infinity();
};

struct EssStepInfo {
  std::size_t proposals = 0;
  double threshold = 0.0;
};

/// One ESS transition given an explicit prior draw `nu` ~ N(0, C).
template <class LogLik, class R>
EssState ess_step_with_draw(const EssState& state, const LatentPath& nu, LogLik&& loglik, R& rng,
                            EssStepInfo* info = nullptr) {
  if (!std::isfinite(state.loglik))
    throw NumericalError("elliptical slice: log-likelihood at the current state is not finite");
  const double log_y = state.loglik + std::log(uniform01(rng));
  double alpha = uniform(rng, 0.0, 2.0 * M_PI);
  double alpha_min = alpha - 2.0 * M_PI;
  double alpha_max = alpha;
  if (info) {
    info->proposals = 0;
    info->threshold = log_y;
  }
  for (;;) {
    EssState prop;
    prop.u = state.u * std::cos(alpha) + nu * std::sin(alpha);
    prop.loglik = loglik(prop.u);
    if (info) ++info->proposals;
    if (prop.loglik >= log_y && !std::isnan(prop.loglik)) return prop;
    if (alpha < 0.0)
      alpha_min = alpha;
    else
      alpha_max = alpha;
    // The bracket always contains 0, where the current state satisfies the
    // slice; once it has collapsed numerically, the current state is the answer.
    if (alpha_max - alpha_min < 1e-14) return state;
    alpha = uniform(rng, alpha_min, alpha_max);
  }
}

template <class LogLik, class R>
EssState ess_step(const EssState& state, const CovFactor& prior, LogLik&& loglik, R& rng, EssStepInfo* info = nullptr) {
  require(state.u.size() == prior.size(), "ess_step: latent length does not match covariance");
  const LatentPath nu = sample_gp_prior(prior, rng);
  return ess_step_with_draw(state, nu, std::forward<LogLik>(loglik), rng, info);
}

} // namespace spikesync
