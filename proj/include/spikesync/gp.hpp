#pragma once

// Gaussian-process prior over latent log-odds firing paths.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "spikesync/errors.hpp"
#include "spikesync/random.hpp"
#include "spikesync/spike_data.hpp"

namespace spikesync {

inline constexpr double kProbClamp = 1e-12;

/// Covariance hyperparameters on the natural-log scale. Coordinates are
/// ordered (lambda, eta, rho, sigma_eps) for coordinate-wise updates.
struct GpHyperParams {
  std::array<double, 4> log_values{0.0, 0.0, 0.0, 0.0};

  static constexpr std::array<const char*, 4> names{"log_lambda", "log_eta", "log_rho", "log_sigma_eps"};

  double& operator[](std::size_t i) { return log_values[i]; }
  double operator[](std::size_t i) const { return log_values[i]; }

  double lambda() const { return std::exp(log_values[0]); }
  double eta() const { return std::exp(log_values[1]); }
  double rho() const { return std::exp(log_values[2]); }
  double sigma_eps() const { return std::exp(log_values[3]); }

  bool finite() const {
    for (double v : log_values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

using LatentPath = Eigen::VectorXd;

struct CovFactor {
  Eigen::MatrixXd cov;  // without jitter
  Eigen::MatrixXd chol; // lower triangular, chol * chol^T = cov + jitter * I
  double jitter = 0.0;

  Eigen::Index size() const { return cov.rows(); }

  /// log|cov + jitter I|
  double log_det() const { return 2.0 * chol.diagonal().array().log().sum(); }
};

/// C_ij = lambda^2 + eta^2 exp(-rho^2 (t_i - t_j)^2) + [i == j] sigma_eps^2.
inline Eigen::MatrixXd covariance_matrix(const Eigen::VectorXd& t_grid, const GpHyperParams& h) {
  const Eigen::Index n = t_grid.size();
  const double l2 = h.lambda() * h.lambda();
  const double e2 = h.eta() * h.eta();
  const double r2 = h.rho() * h.rho();
  const double s2 = h.sigma_eps() * h.sigma_eps();
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i, i) = l2 + e2 + s2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double d = t_grid[i] - t_grid[j];
      const double v = l2 + e2 * std::exp(-r2 * d * d);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

/// Factorizes C, adding diagonal jitter 1e-10 * mean(diag), escalated by
/// 10x up to 1e-4 * mean(diag), only when the plain factorization fails.
inline CovFactor factorize_covariance(Eigen::MatrixXd cov) {
  CovFactor f;
  const double mean_diag = cov.diagonal().mean();
  if (!std::isfinite(mean_diag) || mean_diag <= 0.0) throw NumericalError("covariance has a non-positive or non-finite diagonal");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  double jitter = 0.0;
  double next = 1e-10 * mean_diag;
  while (llt.info() != Eigen::Success) {
    if (next > 1e-4 * mean_diag * (1.0 + 1e-9))
      throw NumericalError("Cholesky factorization failed after jitter escalation");
    jitter = next;
    next *= 10.0;
    Eigen::MatrixXd jittered = cov;
    jittered.diagonal().array() += jitter;
    llt.compute(jittered);
  }
  f.chol = llt.matrixL();
  f.jitter = jitter;
  f.cov = std::move(cov);
  return f;
}

inline CovFactor build_covariance(const Eigen::VectorXd& t_grid, const GpHyperParams& h) {
  require(t_grid.size() > 0, "build_covariance: empty time grid");
  require(h.finite(), "build_covariance: non-finite hyperparameters");
  return factorize_covariance(covariance_matrix(t_grid, h));
}

/// log N(u | 0, C).
inline double gp_log_prior(const LatentPath& u, const CovFactor& f) {
  const Eigen::VectorXd w = f.chol.triangularView<Eigen::Lower>().solve(u);
  return -0.5 * w.squaredNorm() - 0.5 * f.log_det() - 0.5 * static_cast<double>(u.size()) * std::log(2.0 * M_PI);
}

template <class R>
LatentPath sample_gp_prior(const CovFactor& f, R& rng) {
  return f.chol * standard_normal_vector(rng, f.size());
}

// ---------------------------------------------------------------------------
// Logistic link

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// log(sigmoid(x)) and log(1 - sigmoid(x)), both clamped so the implied
/// probability stays inside [1e-12, 1 - 1e-12].
inline double log_sigmoid(double x) {
  return std::clamp(-softplus(-x), std::log(kProbClamp), std::log1p(-kProbClamp));
}
inline double log1m_sigmoid(double x) { return log_sigmoid(-x); }

inline double logistic(double x) {
  const double p = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline Eigen::VectorXd logistic_rate(const LatentPath& u) { return u.unaryExpr([](double x) { return logistic(x); }); }

// ---------------------------------------------------------------------------
// Bernoulli likelihood with a shared path across trials

/// Sum over trials and bins given per-bin spike counts out of `trials`.
inline double bernoulli_loglik_counts(const LatentPath& u, const Eigen::VectorXd& spikes, double trials) {
  double ll = 0.0;
  for (Eigen::Index t = 0; t < u.size(); ++t) {
    if (spikes[t] > 0.0) ll += spikes[t] * log_sigmoid(u[t]);
    const double silent = trials - spikes[t];
    if (silent > 0.0) ll += silent * log1m_sigmoid(u[t]);
  }
  return ll;
}

inline double bernoulli_loglik(const LatentPath& u, const SpikeTrainSet& data) {
  require(u.size() == data.bin_count(), "bernoulli_loglik: latent length " + std::to_string(u.size()) +
                                            " != bin count " + std::to_string(data.bin_count()));
  if (data.trial_count() == 0) return 0.0;
  return bernoulli_loglik_counts(u, data.spike_counts(), static_cast<double>(data.trial_count()));
}

/// d/du_t of the Bernoulli log-likelihood: spikes_t - R * p_t.
inline Eigen::VectorXd bernoulli_loglik_grad(const LatentPath& u, const SpikeTrainSet& data) {
  require(u.size() == data.bin_count(), "bernoulli_loglik_grad: shape mismatch");
  return data.spike_counts() - static_cast<double>(data.trial_count()) * logistic_rate(u);
}

// ---------------------------------------------------------------------------
// Hyperprior: independent N(0, sd^2) on each log hyperparameter.

inline double hyperprior_logdensity(const GpHyperParams& h, double sd = 3.0) {
  const double norm = -0.5 * std::log(2.0 * M_PI * sd * sd);
  double lp = 0.0;
  for (double v : h.log_values) lp += norm - 0.5 * v * v / (sd * sd);
  return lp;
}

} // namespace spikesync
