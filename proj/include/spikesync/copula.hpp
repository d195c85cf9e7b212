#pragma once

// Second-order Farlie-Gumbel-Morgenstern copula over n binary neurons at lag
// zero. beta holds one coefficient per unordered pair (j1 < j2), laid out
// as the row-major upper triangle: (0,1), (0,2), ..., (0,n-1), (1,2), ...
// The region sum_{j1<j2} |beta_{j1 j2}| <= 1 keeps every joint pmf valid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "spikesync/errors.hpp"
#include "spikesync/gibbs.hpp"
#include "spikesync/gp.hpp"
#include "spikesync/samplers/ball_maps.hpp"
#include "spikesync/samplers/spherical_hmc.hpp"
#include "spikesync/single.hpp"
#include "spikesync/spike_data.hpp"
#include "spikesync/summary.hpp"

namespace spikesync {

inline constexpr double kBetaConstraintTol = 1e-12;

inline std::size_t pair_count(std::size_t n) { return n * (n - 1) / 2; }

/// Position of pair (j1, j2), j1 < j2, in the beta vector.
inline std::size_t pair_index(std::size_t j1, std::size_t j2, std::size_t n) {
  require(j1 < j2 && j2 < n, "pair_index: need j1 < j2 < n");
  return j1 * n - j1 * (j1 + 1) / 2 + (j2 - j1 - 1);
}

inline std::pair<std::size_t, std::size_t> pair_of_index(std::size_t k, std::size_t n) {
  for (std::size_t j1 = 0; j1 + 1 < n; ++j1) {
    const std::size_t row = n - j1 - 1;
    if (k < row) return {j1, j1 + 1 + k};
    k -= row;
  }
  throw ValidationError("pair_of_index: index out of range");
}

/// Number of neurons implied by a beta vector length.
inline std::size_t neurons_for_pairs(std::size_t pairs) {
  std::size_t n = 1;
  while (pair_count(n) < pairs) ++n;
  require(pair_count(n) == pairs, "beta length " + std::to_string(pairs) + " is not n(n-1)/2 for any n");
  return n;
}

inline bool beta_feasible(const Eigen::VectorXd& beta) { return beta.lpNorm<1>() <= 1.0 + kBetaConstraintTol; }

inline void require_beta_feasible(const Eigen::VectorXd& beta) {
  if (!beta_feasible(beta))
    throw ValidationError("copula constraint violated: sum |beta| = " + std::to_string(beta.lpNorm<1>()) + " > 1");
}

/// H(F) = [1 + sum_{j1<j2} beta (1 - F_j1)(1 - F_j2)] prod_i F_i.
inline double fgm_cdf(const Eigen::VectorXd& F, const Eigen::VectorXd& beta) {
  const auto n = static_cast<std::size_t>(F.size());
  require(beta.size() == static_cast<Eigen::Index>(pair_count(n)), "fgm_cdf: beta length does not match n");
  require_beta_feasible(beta);
  double prod = 1.0;
  for (Eigen::Index i = 0; i < F.size(); ++i) {
    require(F[i] >= 0.0 && F[i] <= 1.0, "fgm_cdf: marginal CDF values must lie in [0, 1]");
    prod *= F[i];
  }
  if (prod == 0.0) return 0.0;
  double inter = 1.0;
  std::size_t k = 0;
  for (std::size_t j1 = 0; j1 < n; ++j1)
    for (std::size_t j2 = j1 + 1; j2 < n; ++j2, ++k)
      inter += beta[static_cast<Eigen::Index>(k)] * (1.0 - F[static_cast<Eigen::Index>(j1)]) * (1.0 - F[static_cast<Eigen::Index>(j2)]);
  return inter * prod;
}

/// P(Y = y) by inclusion-exclusion of H over the lower-orthant corners
/// below y, with Bernoulli margins F_i(0) = 1 - p_i, F_i(1) = 1.
inline double fgm_binary_pmf(const std::vector<int>& y, const Eigen::VectorXd& p, const Eigen::VectorXd& beta) {
  const auto n = y.size();
  require(static_cast<Eigen::Index>(n) == p.size(), "fgm_binary_pmf: y and p differ in length");
  require(n <= 30, "fgm_binary_pmf: too many neurons for enumeration");
  for (Eigen::Index i = 0; i < p.size(); ++i)
    require(p[i] > 0.0 && p[i] < 1.0, "fgm_binary_pmf: firing probabilities must lie in (0, 1)");
  require_beta_feasible(beta);
  std::vector<std::size_t> ones;
  for (std::size_t i = 0; i < n; ++i) {
    require(y[i] == 0 || y[i] == 1, "fgm_binary_pmf: outcomes must be 0 or 1");
    if (y[i]) ones.push_back(i);
  }
  double total = 0.0;
  Eigen::VectorXd F(static_cast<Eigen::Index>(n));
  const std::uint64_t corners = std::uint64_t{1} << ones.size();
  for (std::uint64_t mask = 0; mask < corners; ++mask) {
    // bit set: that spiking neuron is evaluated at its "0" level
    int lowered = 0;
    for (std::size_t i = 0; i < n; ++i) F[static_cast<Eigen::Index>(i)] = y[i] ? 1.0 : 1.0 - p[static_cast<Eigen::Index>(i)];
    for (std::size_t b = 0; b < ones.size(); ++b) {
      if (mask & (std::uint64_t{1} << b)) {
        F[static_cast<Eigen::Index>(ones[b])] = 1.0 - p[static_cast<Eigen::Index>(ones[b])];
        ++lowered;
      }
    }
    total += (lowered % 2 ? -1.0 : 1.0) * fgm_cdf(F, beta);
  }
  if (total < -1e-12) throw NumericalError("fgm_binary_pmf: negative probability " + std::to_string(total));
  return std::max(total, 0.0);
}

/// zeta = 1 + beta (1 - p)(1 - q) and its inverse.
inline double beta_from_zeta(double zeta, double p, double q) {
  require(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0, "beta_from_zeta: degenerate margins");
  return (zeta - 1.0) / ((1.0 - p) * (1.0 - q));
}
inline double zeta_from_beta(double beta, double p, double q) {
  require(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0, "zeta_from_beta: degenerate margins");
  return 1.0 + beta * (1.0 - p) * (1.0 - q);
}

// ---------------------------------------------------------------------------
// Likelihood on binned ensembles

/// Spike patterns across neurons, tallied per bin over trials.
class PatternCounts {
public:
  struct Entry {
    std::uint64_t mask; // bit i = neuron i fired
    double count;
  };

  explicit PatternCounts(const Ensemble& e) {
    e.validate();
    n_ = e.size();
    require(n_ <= 63, "copula model supports at most 63 neurons");
    const Eigen::Index T = e.bin_count();
    const Eigen::Index R = e.trial_count();
    bins_.resize(static_cast<std::size_t>(T));
    for (Eigen::Index t = 0; t < T; ++t) {
      std::vector<Entry>& entries = bins_[static_cast<std::size_t>(t)];
      for (Eigen::Index r = 0; r < R; ++r) {
        std::uint64_t m = 0;
        for (std::size_t i = 0; i < n_; ++i)
          if (e.neurons[i].trials(r, t)) m |= std::uint64_t{1} << i;
        auto it = std::find_if(entries.begin(), entries.end(), [m](const Entry& x) { return x.mask == m; });
        if (it == entries.end())
          entries.push_back({m, 1.0});
        else
          it->count += 1.0;
      }
      std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.mask < b.mask; });
    }
  }

  std::size_t neurons() const { return n_; }
  Eigen::Index bins() const { return static_cast<Eigen::Index>(bins_.size()); }
  const std::vector<Entry>& at(Eigen::Index t) const { return bins_[static_cast<std::size_t>(t)]; }

private:
  std::size_t n_ = 0;
  std::vector<std::vector<Entry>> bins_;
};

namespace detail {

/// Closed form of the inclusion-exclusion sum:
///   P(y) = prod_i base_i * [1 + sum_{j1<j2} beta c_j1 c_j2],
///   base_i = p_i or 1 - p_i,  c_i = -(1 - p_i) if y_i = 1 else p_i.
/// interaction() returns the bracket and leaves c filled in.
inline double interaction(std::uint64_t mask, const Eigen::VectorXd& p, const Eigen::VectorXd& beta, Eigen::VectorXd& c) {
  const auto n = static_cast<std::size_t>(p.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    c[ii] = (mask >> i) & 1U ? -(1.0 - p[ii]) : p[ii];
  }
  double s = 1.0;
  std::size_t k = 0;
  for (std::size_t j1 = 0; j1 < n; ++j1) {
    const double cj1 = c[static_cast<Eigen::Index>(j1)];
    for (std::size_t j2 = j1 + 1; j2 < n; ++j2, ++k) s += beta[static_cast<Eigen::Index>(k)] * cj1 * c[static_cast<Eigen::Index>(j2)];
  }
  return s;
}

} // namespace detail

/// Pmf of one pattern through the closed form (same value as fgm_binary_pmf).
inline double fgm_binary_pmf_fast(std::uint64_t mask, const Eigen::VectorXd& p, const Eigen::VectorXd& beta) {
  Eigen::VectorXd c(p.size());
  double base = 1.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) base *= (mask >> i) & 1U ? p[i] : 1.0 - p[i];
  return base * detail::interaction(mask, p, beta, c);
}

/// Sum over bins and trials of log P(pattern). `logp`/`log1mp` are n x T
/// log-probabilities, `prob` the matching probabilities. Optionally returns
/// the gradient with respect to beta. -inf if some observed pattern has
/// nonpositive probability.
inline double copula_loglik_from_rates(const PatternCounts& counts, const Eigen::MatrixXd& prob, const Eigen::MatrixXd& logp,
                                       const Eigen::MatrixXd& log1mp, const Eigen::VectorXd& beta,
                                       Eigen::VectorXd* grad = nullptr) {
  const auto n = counts.neurons();
  Eigen::VectorXd c(static_cast<Eigen::Index>(n));
  if (grad) *grad = Eigen::VectorXd::Zero(beta.size());
  double ll = 0.0;
  for (Eigen::Index t = 0; t < counts.bins(); ++t) {
    const Eigen::VectorXd p = prob.col(t);
    for (const auto& e : counts.at(t)) {
      double lb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        lb += (e.mask >> i) & 1U ? logp(ii, t) : log1mp(ii, t);
      }
      const double s = detail::interaction(e.mask, p, beta, c);
      if (!(s > 0.0)) return -std::numeric_limits<double>::infinity();
      ll += e.count * (lb + std::log(s));
      if (grad) {
        std::size_t k = 0;
        for (std::size_t j1 = 0; j1 < n; ++j1)
          for (std::size_t j2 = j1 + 1; j2 < n; ++j2, ++k)
            (*grad)[static_cast<Eigen::Index>(k)] += e.count * c[static_cast<Eigen::Index>(j1)] * c[static_cast<Eigen::Index>(j2)] / s;
      }
    }
  }
  return ll;
}

struct RateTables {
  Eigen::MatrixXd prob, logp, log1mp; // neurons x bins

  void resize(std::size_t n, Eigen::Index bins) {
    prob.resize(static_cast<Eigen::Index>(n), bins);
    logp.resize(static_cast<Eigen::Index>(n), bins);
    log1mp.resize(static_cast<Eigen::Index>(n), bins);
  }
  void set_row(std::size_t i, const LatentPath& u) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index t = 0; t < u.size(); ++t) {
      prob(r, t) = logistic(u[t]);
      logp(r, t) = log_sigmoid(u[t]);
      log1mp(r, t) = log1m_sigmoid(u[t]);
    }
  }
};

/// Checked evaluation from latent paths and raw data.
inline double copula_loglik(const std::vector<LatentPath>& latents, const Eigen::VectorXd& beta, const Ensemble& data,
                            Eigen::VectorXd* grad = nullptr) {
  require(latents.size() == data.size(), "copula_loglik: one latent path per neuron required");
  require(beta.size() == static_cast<Eigen::Index>(pair_count(data.size())), "copula_loglik: beta length does not match n");
  require_beta_feasible(beta);
  const PatternCounts counts(data);
  RateTables rt;
  rt.resize(data.size(), data.bin_count());
  for (std::size_t i = 0; i < latents.size(); ++i) {
    require(latents[i].size() == data.bin_count(), "copula_loglik: latent length mismatch");
    rt.set_row(i, latents[i]);
  }
  return copula_loglik_from_rates(counts, rt.prob, rt.logp, rt.log1mp, beta, grad);
}

// ---------------------------------------------------------------------------
// Posterior inference

/// Target for the beta block on the sphere: copula log-likelihood (flat prior
/// on the L1 ball) pulled back through the L1 -> L2 ball map, plus the
/// sphere's log|theta_{D+1}|.
inline auto copula_sphere_target(const PatternCounts& counts, const RateTables& rates, const BallMap& map = {}) {
  return sphere_target([&counts, &rates, map](const Eigen::VectorXd& theta) -> DensityGrad {
    const Eigen::VectorXd beta = map.to_l1(theta);
    Eigen::VectorXd g;
    const double f = copula_loglik_from_rates(counts, rates.prob, rates.logp, rates.log1mp, beta, &g);
    if (!std::isfinite(f)) return {f, Eigen::VectorXd::Zero(theta.size())};
    return map.pull_back(theta, f, g);
  });
}

class CopulaModel {
public:
  CopulaModel(const Ensemble& data, const SamplerConfig& cfg) : counts_(data), rng_(make_stream(cfg.seed, 0)), map_(cfg.ball_map) {
    require(data.size() >= 2, "copula model needs at least two neurons");
    for (std::size_t i = 0; i < data.size(); ++i) {
      neurons_.push_back(init_neuron_state(data.neurons[i], cfg.seed, i + 1));
      ids_.push_back(data.neurons[i].neuron_id);
    }
    rates_.resize(data.size(), data.bin_count());
    for (std::size_t i = 0; i < neurons_.size(); ++i) rates_.set_row(i, neurons_[i].latent);
    beta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pair_count(data.size())));
    point_ = ball_to_sphere(map_.to_l2(beta_));
  }

  std::vector<NeuronGpState>& neurons() { return neurons_; }
  const std::vector<NeuronGpState>& neurons() const { return neurons_; }
  const PatternCounts& counts() const { return counts_; }
  const RateTables& rates() const { return rates_; }
  const Eigen::VectorXd& beta() const { return beta_; }

  void set_beta(const Eigen::VectorXd& beta) {
    require(beta.size() == beta_.size(), "set_beta: wrong length");
    require_beta_feasible(beta);
    beta_ = beta;
    point_ = ball_to_sphere(map_.to_l2(beta_));
  }

  double loglik() const { return copula_loglik_from_rates(counts_, rates_.prob, rates_.logp, rates_.log1mp, beta_); }

  double latent_loglik(std::size_t i, const LatentPath& u) const {
    RateTables& scratch = scratch_;
    scratch = rates_;
    scratch.set_row(i, u);
    return copula_loglik_from_rates(counts_, scratch.prob, scratch.logp, scratch.log1mp, beta_);
  }
  void set_latent(std::size_t i, LatentPath u) {
    neurons_[i].latent = std::move(u);
    rates_.set_row(i, neurons_[i].latent);
  }

  void update_dependence(const SamplerConfig& cfg) {
    auto target = copula_sphere_target(counts_, rates_, map_);
    const HmcStepResult r = spherical_hmc_step(point_, target, cfg.hmc, rng_);
    ++proposals_;
    if (r.accepted) ++accepted_;
    point_ = r.point;
    beta_ = map_.to_l1(point_.ball());
    // Rounding in the two norms can leave sum|beta| a few ulps above 1.
    const double l1 = beta_.lpNorm<1>();
    if (l1 > 1.0) beta_ /= l1;
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    const std::size_t n = neurons_.size();
    for (std::size_t j1 = 0; j1 < n; ++j1)
      for (std::size_t j2 = j1 + 1; j2 < n; ++j2) names.push_back("beta." + ids_[j1] + "." + ids_[j2]);
    for (const auto& id : ids_)
      for (const auto& s : hyper_names(id)) names.push_back(s);
    return names;
  }
  void record(DrawRow row) const {
    row.head(beta_.size()) = beta_.transpose();
    Eigen::Index k = beta_.size();
    for (const auto& nrn : neurons_)
      for (std::size_t i = 0; i < 4; ++i) row[k++] = nrn.hyper[i];
  }
  std::size_t accepted() const { return accepted_; }
  std::size_t proposals() const { return proposals_; }

private:
  PatternCounts counts_;
  std::vector<std::string> ids_;
  std::vector<NeuronGpState> neurons_;
  RateTables rates_;
  mutable RateTables scratch_;
  Eigen::VectorXd beta_;
  SphericalPoint point_;
  Rng rng_;
  BallMap map_;
  std::size_t accepted_ = 0;
  std::size_t proposals_ = 0;
};

struct PairEffect {
  std::size_t j1 = 0, j2 = 0;
  std::string id1, id2;
  double median = 0.0;
  Interval ci95{0.0, 0.0};
  bool significant = false; // 95% interval excludes 0
};

struct MultiFitResult {
  ChainOutput chain;
  std::vector<PairEffect> pairs;
  std::vector<RateSummary> rates;
};

inline MultiFitResult fit_multi(const Ensemble& data, const SamplerConfig& cfg) {
  CopulaModel model(data, cfg);
  MultiFitResult res;
  res.chain = run_chain(model, cfg);
  const std::size_t n = data.size();
  std::size_t k = 0;
  for (std::size_t j1 = 0; j1 < n; ++j1) {
    for (std::size_t j2 = j1 + 1; j2 < n; ++j2, ++k) {
      PairEffect e;
      e.j1 = j1;
      e.j2 = j2;
      e.id1 = data.neurons[j1].neuron_id;
      e.id2 = data.neurons[j2].neuron_id;
      const auto draws = column(res.chain.draws, static_cast<Eigen::Index>(k));
      e.median = median(draws);
      e.ci95 = equal_tailed_interval(draws);
      e.significant = e.ci95.lo > 0.0 || e.ci95.hi < 0.0;
      res.pairs.push_back(e);
    }
  }
  for (const auto& rd : res.chain.rate_draws) res.rates.push_back(summarize_rates(rd));
  return res;
}

} // namespace spikesync
