#pragma once

// Two-neuron synchrony model. At lag L the pair (y_t, z_{t+L}) has joint
// spike probability p_t q_{t+L} zeta; bins left unpaired by the shift enter
// through their marginals. zeta is shared across bins and trials, L is
// drawn from {-K, ..., K}, both with flat priors; feasibility of the joint
// table at every paired bin is enforced through the likelihood.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spikesync/errors.hpp"
#include "spikesync/gibbs.hpp"
#include "spikesync/gp.hpp"
#include "spikesync/samplers/slice.hpp"
#include "spikesync/single.hpp"
#include "spikesync/spike_data.hpp"
#include "spikesync/summary.hpp"

namespace spikesync {

struct ZetaBounds {
  double lo;
  double hi;
  bool contains(double z) const { return lo <= z && z <= hi; }
};

/// Range of zeta for which the joint table with margins (p, q) is a
/// probability table: max(p+q-1, 0)/(pq) <= zeta <= min(p, q)/(pq).
inline ZetaBounds zeta_bounds(double p, double q) {
  require(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0, "zeta_bounds: margins must lie strictly inside (0, 1)");
  const double pq = p * q;
  return {std::max(p + q - 1.0, 0.0) / pq, std::min(p, q) / pq};
}

struct JointTable {
  double p11, p10, p01, p00;
  double sum() const { return p11 + p10 + p01 + p00; }
};

inline JointTable joint_table(double p, double q, double zeta) {
  const ZetaBounds b = zeta_bounds(p, q);
  const double tol = 1e-12 * std::max(1.0, b.hi);
  if (zeta < b.lo - tol || zeta > b.hi + tol)
    throw ValidationError("joint_table: zeta " + std::to_string(zeta) + " outside feasible range [" +
                          std::to_string(b.lo) + ", " + std::to_string(b.hi) + "]");
  const double j = p * q * zeta;
  JointTable t{j, p - j, q - j, (1.0 - p) * (1.0 - q) + p * q * (zeta - 1.0)};
  t.p10 = std::max(t.p10, 0.0);
  t.p01 = std::max(t.p01, 0.0);
  t.p00 = std::max(t.p00, 0.0);
  return t;
}

/// Sufficient statistics of the data at one lag.
struct LagCounts {
  int lag = 0;
  std::vector<Eigen::Index> a_bin, b_bin;     // paired bins (t, t + lag)
  std::vector<std::array<double, 4>> cells;   // n11, n10, n01, n00 over trials
  std::vector<Eigen::Index> a_only, b_only;   // bins entering through a marginal
  std::vector<double> a_only_spikes, b_only_spikes;
};

class PairwiseData {
public:
  PairwiseData(const SpikeTrainSet& a, const SpikeTrainSet& b, int max_lag) : max_lag_(max_lag) {
    require(a.trial_count() == b.trial_count() && a.bin_count() == b.bin_count(),
            "pairwise data: the two neurons differ in shape");
    require(max_lag >= 0, "pairwise data: max_lag must be >= 0");
    require(max_lag < a.bin_count(), "pairwise data: max_lag must be smaller than the number of bins");
    trials_ = static_cast<double>(a.trial_count());
    bins_ = a.bin_count();
    for (int lag = -max_lag; lag <= max_lag; ++lag) by_lag_.push_back(count_at(a, b, lag));
  }

  int max_lag() const { return max_lag_; }
  double trials() const { return trials_; }
  Eigen::Index bins() const { return bins_; }

  const LagCounts& at(int lag) const {
    require(std::abs(lag) <= max_lag_, "lag " + std::to_string(lag) + " outside [-K, K] with K = " + std::to_string(max_lag_));
    return by_lag_[static_cast<std::size_t>(lag + max_lag_)];
  }

private:
  static LagCounts count_at(const SpikeTrainSet& a, const SpikeTrainSet& b, int lag) {
    const Eigen::Index T = a.bin_count();
    const Eigen::Index shift = std::abs(lag);
    LagCounts c;
    c.lag = lag;
    const Eigen::Index a_start = lag >= 0 ? 0 : shift;
    for (Eigen::Index i = 0; i < T - shift; ++i) {
      const Eigen::Index ta = a_start + i;
      const Eigen::Index tb = ta + lag;
      std::array<double, 4> n{0.0, 0.0, 0.0, 0.0};
      for (Eigen::Index r = 0; r < a.trial_count(); ++r) {
        const int y = a.trials(r, ta);
        const int z = b.trials(r, tb);
        n[static_cast<std::size_t>((1 - y) * 2 + (1 - z))] += 1.0;
      }
      c.a_bin.push_back(ta);
      c.b_bin.push_back(tb);
      c.cells.push_back(n);
    }
    const Eigen::VectorXd sa = a.spike_counts();
    const Eigen::VectorXd sb = b.spike_counts();
    if (lag >= 0) {
      for (Eigen::Index t = T - shift; t < T; ++t) c.a_only.push_back(t);
      for (Eigen::Index t = 0; t < shift; ++t) c.b_only.push_back(t);
    } else {
      for (Eigen::Index t = 0; t < shift; ++t) c.a_only.push_back(t);
      for (Eigen::Index t = T - shift; t < T; ++t) c.b_only.push_back(t);
    }
    for (auto t : c.a_only) c.a_only_spikes.push_back(sa[t]);
    for (auto t : c.b_only) c.b_only_spikes.push_back(sb[t]);
    return c;
  }

  int max_lag_;
  double trials_ = 0.0;
  Eigen::Index bins_ = 0;
  std::vector<LagCounts> by_lag_;
};

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// count * log(prob) where prob = exp(logprob) may be exactly zero.
inline double weighted_log(double count, double logprob) { return count > 0.0 ? count * logprob : 0.0; }

/// Log-likelihood of the four cell counts at one paired bin; -inf when the
/// table is infeasible. Each cell is written as its independence value times
/// a correction that is exactly 1 at zeta = 1, so that case reproduces
/// bernoulli_loglik term by term.
inline double paired_bin_loglik(double u, double v, double zeta, const std::array<double, 4>& n) {
  if (!(zeta >= 0.0)) return kNegInf;
  const double p = logistic(u);
  const double q = logistic(v);
  const double tol = 1e-12;
  const double d10 = -q * (zeta - 1.0) / (1.0 - q);               // p10 = p (1-q) (1 + d10)
  const double d01 = -p * (zeta - 1.0) / (1.0 - p);               // p01 = (1-p) q (1 + d01)
  const double d00 = p * q * (zeta - 1.0) / ((1.0 - p) * (1.0 - q)); // p00 = (1-p)(1-q)(1 + d00)
  if (d10 < -1.0 - tol || d01 < -1.0 - tol || d00 < -1.0 - tol) return kNegInf;
  auto log1p_or_neginf = [](double d) { return d <= -1.0 ? kNegInf : std::log1p(d); };
  const double lp = log_sigmoid(u), lq = log_sigmoid(v);
  const double l1p = log1m_sigmoid(u), l1q = log1m_sigmoid(v);
  double ll = 0.0;
  ll += weighted_log(n[0], lp + lq + (zeta > 0.0 ? std::log(zeta) : kNegInf));
  ll += weighted_log(n[1], lp + l1q + log1p_or_neginf(d10));
  ll += weighted_log(n[2], l1p + lq + log1p_or_neginf(d01));
  ll += weighted_log(n[3], l1p + l1q + log1p_or_neginf(d00));
  return ll;
}

} // namespace detail

/// Log-likelihood at lag `counts.lag` given latent paths u (neuron a) and
/// v (neuron b); -inf if zeta is infeasible at any paired bin.
inline double pair_loglik_counts(const LagCounts& counts, const LatentPath& u, const LatentPath& v, double zeta,
                                 double trials) {
  double ll = 0.0;
  for (std::size_t i = 0; i < counts.cells.size(); ++i) {
    ll += detail::paired_bin_loglik(u[counts.a_bin[i]], v[counts.b_bin[i]], zeta, counts.cells[i]);
    if (ll == detail::kNegInf) return ll;
  }
  for (std::size_t i = 0; i < counts.a_only.size(); ++i) {
    const double x = u[counts.a_only[i]];
    ll += detail::weighted_log(counts.a_only_spikes[i], log_sigmoid(x)) +
          detail::weighted_log(trials - counts.a_only_spikes[i], log1m_sigmoid(x));
  }
  for (std::size_t i = 0; i < counts.b_only.size(); ++i) {
    const double x = v[counts.b_only[i]];
    ll += detail::weighted_log(counts.b_only_spikes[i], log_sigmoid(x)) +
          detail::weighted_log(trials - counts.b_only_spikes[i], log1m_sigmoid(x));
  }
  return ll;
}

/// Intersection of the per-bin zeta bounds over the bins paired at this lag.
inline ZetaBounds feasible_zeta_range(const LagCounts& counts, const LatentPath& u, const LatentPath& v) {
  ZetaBounds r{0.0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < counts.a_bin.size(); ++i) {
    const ZetaBounds b = zeta_bounds(logistic(u[counts.a_bin[i]]), logistic(v[counts.b_bin[i]]));
    r.lo = std::max(r.lo, b.lo);
    r.hi = std::min(r.hi, b.hi);
  }
  return r;
}

/// Checked likelihood evaluation from raw data.
inline double pair_loglik_at_lag(const LatentPath& u, const LatentPath& v, double zeta, int lag,
                                 const SpikeTrainSet& data_a, const SpikeTrainSet& data_b, int max_lag) {
  require(u.size() == data_a.bin_count() && v.size() == data_b.bin_count(), "pair_loglik_at_lag: latent length mismatch");
  require(std::abs(lag) <= max_lag, "pair_loglik_at_lag: |L| exceeds K");
  const PairwiseData data(data_a, data_b, max_lag);
  const LagCounts& c = data.at(lag);
  const ZetaBounds range = feasible_zeta_range(c, u, v);
  const double tol = 1e-12 * std::max(1.0, range.hi);
  if (zeta < range.lo - tol || zeta > range.hi + tol)
    throw ValidationError("pair_loglik_at_lag: zeta " + std::to_string(zeta) + " infeasible at lag " + std::to_string(lag));
  return pair_loglik_counts(c, u, v, zeta, data.trials());
}

/// Likelihood at one lag as a function of zeta alone, with the latent paths
/// held fixed. Each cell is its independence value times 1 + a (zeta - 1).
class ZetaProfile {
public:
  ZetaProfile(const LagCounts& counts, const LatentPath& u, const LatentPath& v, double trials)
      : range_(feasible_zeta_range(counts, u, v)) {
    base_ = pair_loglik_counts(counts, u, v, 1.0, trials);
    for (std::size_t i = 0; i < counts.cells.size(); ++i) {
      const double p = logistic(u[counts.a_bin[i]]);
      const double q = logistic(v[counts.b_bin[i]]);
      const auto& n = counts.cells[i];
      n11_ += n[0];
      if (n[1] > 0.0) terms_.push_back({n[1], -q / (1.0 - q)});
      if (n[2] > 0.0) terms_.push_back({n[2], -p / (1.0 - p)});
      if (n[3] > 0.0) terms_.push_back({n[3], p * q / ((1.0 - p) * (1.0 - q))});
    }
  }

  const ZetaBounds& range() const { return range_; }

  double operator()(double zeta) const {
    if (zeta < range_.lo || zeta > range_.hi) return detail::kNegInf;
    double ll = base_ + (n11_ > 0.0 ? n11_ * std::log(zeta) : 0.0);
    const double dz = zeta - 1.0;
    for (const auto& t : terms_) {
      const double d = t.slope * dz;
      if (d <= -1.0) return detail::kNegInf;
      ll += t.count * std::log1p(d);
    }
    return ll;
  }

private:
  struct Term {
    double count, slope;
  };
  ZetaBounds range_;
  double base_ = 0.0;
  double n11_ = 0.0;
  std::vector<Term> terms_;
};

/// log of the integral of exp(profile) over its feasible range (flat prior
/// on zeta). The profile is concave, so the mass sits between the points
/// where it has dropped by 40 nats from the mode; Simpson's rule there.
inline double log_integrated_likelihood(const ZetaProfile& f, int simpson_intervals = 64) {
  double lo = f.range().lo, hi = f.range().hi;
  if (!(hi > lo)) return detail::kNegInf;
  // golden-section search for the mode
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 60 && b - a > 1e-10 * std::max(1.0, b); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
    }
  }
  const double mode = 0.5 * (a + b);
  const double fmax = f(mode);
  if (!std::isfinite(fmax)) return detail::kNegInf;
  auto edge = [&](double far) {
    if (f(far) > fmax - 40.0) return far;
    double in = mode;
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (in + far);
      if (f(mid) > fmax - 40.0) in = mid;
      else far = mid;
    }
    return far;
  };
  const double left = edge(lo), right = edge(hi);
  const int n = simpson_intervals + simpson_intervals % 2;
  const double h = (right - left) / n;
  if (!(h > 0.0)) return fmax;
  double acc = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    const double fk = f(left + k * h);
    if (std::isfinite(fk)) acc += w * std::exp(fk - fmax);
  }
  return fmax + std::log(acc * h / 3.0);
}

/// p(L | u, v, data) over {-K..K} with zeta integrated out.
inline Eigen::VectorXd lag_marginal_posterior(const PairwiseData& data, const LatentPath& u, const LatentPath& v) {
  const int K = data.max_lag();
  Eigen::VectorXd lw(2 * K + 1);
  for (int k = -K; k <= K; ++k) lw[k + K] = log_integrated_likelihood(ZetaProfile(data.at(k), u, v, data.trials()));
  const double m = lw.maxCoeff();
  require(std::isfinite(m), "lag_marginal_posterior: no lag has a feasible zeta");
  Eigen::VectorXd w = (lw.array() - m).exp().matrix();
  return w / w.sum();
}

/// Significant iff the equal-tailed 95% interval of zeta excludes 1.
inline bool synchrony_decision(const std::vector<double>& zeta_draws) {
  require(zeta_draws.size() >= 100, "synchrony_decision needs at least 100 draws");
  const Interval iv = equal_tailed_interval(zeta_draws);
  return iv.lo > 1.0 || iv.hi < 1.0;
}

class PairwiseModel {
public:
  PairwiseModel(const SpikeTrainSet& a, const SpikeTrainSet& b, const SamplerConfig& cfg)
      : data_(a, b, cfg.max_lag), id_a_(a.neuron_id), id_b_(b.neuron_id), rng_(make_stream(cfg.seed, 0)) {
    a.validate();
    b.validate();
    require(a.trial_count() >= 1, "pairwise model needs at least one trial");
    neurons_.push_back(init_neuron_state(a, cfg.seed, 1));
    neurons_.push_back(init_neuron_state(b, cfg.seed, 2));
    lag_mass_sum_ = Eigen::VectorXd::Zero(2 * data_.max_lag() + 1);
    lag_stride_ = cfg.lag_posterior_stride;
  }

  std::vector<NeuronGpState>& neurons() { return neurons_; }
  const std::vector<NeuronGpState>& neurons() const { return neurons_; }
  const PairwiseData& data() const { return data_; }

  double zeta() const { return zeta_; }
  int lag() const { return lag_; }
  void set_zeta(double z) { zeta_ = z; }
  void set_lag(int l) {
    require(std::abs(l) <= data_.max_lag(), "lag outside [-K, K]");
    lag_ = l;
  }

  double loglik() const { return pair_loglik_counts(data_.at(lag_), neurons_[0].latent, neurons_[1].latent, zeta_, data_.trials()); }

  double latent_loglik(std::size_t i, const LatentPath& u) const {
    const auto& c = data_.at(lag_);
    return i == 0 ? pair_loglik_counts(c, u, neurons_[1].latent, zeta_, data_.trials())
                  : pair_loglik_counts(c, neurons_[0].latent, u, zeta_, data_.trials());
  }
  void set_latent(std::size_t i, LatentPath u) { neurons_[i].latent = std::move(u); }

  /// Slice update of zeta on its conditional, support = feasible range.
  void update_zeta(const SamplerConfig& cfg) {
    const auto& c = data_.at(lag_);
    const ZetaBounds range = feasible_zeta_range(c, neurons_[0].latent, neurons_[1].latent);
    auto target = [&](double z) {
      if (z < range.lo || z > range.hi) return detail::kNegInf;
      return pair_loglik_counts(c, neurons_[0].latent, neurons_[1].latent, z, data_.trials());
    };
    const double f0 = target(zeta_);
    const SliceResult r = slice_sample_1d(zeta_, f0, target, cfg.zeta_slice, rng_);
    zeta_ = r.x;
  }

  /// Full conditional of L over {-K..K} at the current zeta and latents.
  Eigen::VectorXd lag_conditional() const {
    const int K = data_.max_lag();
    Eigen::VectorXd ll(2 * K + 1);
    for (int k = -K; k <= K; ++k)
      ll[k + K] = pair_loglik_counts(data_.at(k), neurons_[0].latent, neurons_[1].latent, zeta_, data_.trials());
    const double m = ll.maxCoeff();
    Eigen::VectorXd w = (ll.array() - m).exp().matrix();
    return w / w.sum();
  }

  void update_lag() {
    const Eigen::VectorXd w = lag_conditional();
    const double u = uniform01(rng_);
    double acc = 0.0;
    const int K = data_.max_lag();
    int pick = K;
    for (int k = -K; k <= K; ++k) {
      acc += w[k + K];
      if (u < acc) {
        pick = k;
        break;
      }
    }
    lag_ = pick;
  }

  void update_dependence(const SamplerConfig& cfg) {
    update_zeta(cfg);
    update_lag();
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> n{"zeta", "lag"};
    for (const auto& s : hyper_names(id_a_)) n.push_back(s);
    for (const auto& s : hyper_names(id_b_)) n.push_back(s);
    return n;
  }
  void record(DrawRow row) const {
    row[0] = zeta_;
    row[1] = lag_;
    for (std::size_t i = 0; i < 4; ++i) {
      row[2 + static_cast<Eigen::Index>(i)] = neurons_[0].hyper[i];
      row[6 + static_cast<Eigen::Index>(i)] = neurons_[1].hyper[i];
    }
  }
  void on_kept_draw() {
    if (lag_stride_ > 0 && kept_ % lag_stride_ == 0) {
      lag_mass_sum_ += lag_marginal_posterior(data_, neurons_[0].latent, neurons_[1].latent);
      ++averaged_;
    }
    ++kept_;
  }
  /// Posterior over L: p(L | u, v, data) with zeta integrated out, averaged
  /// over every `lag_posterior_stride`-th kept draw.
  Eigen::VectorXd lag_posterior() const {
    return averaged_ == 0 ? lag_mass_sum_ : Eigen::VectorXd(lag_mass_sum_ / static_cast<double>(averaged_));
  }
  std::size_t accepted() const { return 0; }
  std::size_t proposals() const { return 0; }

private:
  PairwiseData data_;
  std::string id_a_, id_b_;
  std::vector<NeuronGpState> neurons_;
  Rng rng_;
  double zeta_ = 1.0;
  int lag_ = 0;
  Eigen::VectorXd lag_mass_sum_;
  std::size_t lag_stride_ = 0;
  std::size_t kept_ = 0;
  std::size_t averaged_ = 0;
};

struct PairFitResult {
  ChainOutput chain;
  double zeta_median = 1.0;
  Interval zeta_ci95{1.0, 1.0};
  bool significant = false;
  std::map<int, double> lag_posterior;  // zeta integrated out, averaged over draws
  std::map<int, double> lag_frequency;  // fraction of kept draws at each lag
  std::vector<RateSummary> rates;       // neuron a, neuron b

  int lag_mode() const {
    return std::max_element(lag_posterior.begin(), lag_posterior.end(),
                            [](const auto& x, const auto& y) { return x.second < y.second; })
        ->first;
  }
};

inline PairFitResult fit_pair(const SpikeTrainSet& a, const SpikeTrainSet& b, const SamplerConfig& cfg) {
  PairwiseModel model(a, b, cfg);
  PairFitResult res;
  res.chain = run_chain(model, cfg);
  const auto zeta = res.chain.samples("zeta");
  res.zeta_median = median(zeta);
  res.zeta_ci95 = equal_tailed_interval(zeta);
  res.significant = zeta.size() >= 100 ? synchrony_decision(zeta) : (res.zeta_ci95.lo > 1.0 || res.zeta_ci95.hi < 1.0);
  const int K = cfg.max_lag;
  const Eigen::VectorXd post = model.lag_posterior();
  for (int k = -K; k <= K; ++k) {
    res.lag_posterior[k] = post[k + K];
    res.lag_frequency[k] = 0.0;
  }
  const auto lags = res.chain.samples("lag");
  for (double l : lags) res.lag_frequency[static_cast<int>(l)] += 1.0 / static_cast<double>(lags.size());
  for (const auto& rd : res.chain.rate_draws) res.rates.push_back(summarize_rates(rd));
  return res;
}

} // namespace spikesync
