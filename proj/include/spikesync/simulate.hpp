#pragma once

// Generators for the simulation designs: single neurons with a known rate,
// pairs with excess (possibly lagged) co-firing, regression-coupled pairs,
// FGM-coupled ensembles, and bin-flip noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "spikesync/copula.hpp"
#include "spikesync/errors.hpp"
#include "spikesync/pairwise.hpp"
#include "spikesync/random.hpp"
#include "spikesync/spike_data.hpp"

namespace spikesync {

/// Closed-form rate: a sum of constant, linear, sine and cosine terms.
struct RateTerm {
  enum class Kind { Const, Linear, Sin, Cos };
  Kind kind = Kind::Const;
  double coef = 0.0;  // value, slope, or amplitude
  double freq = 0.0;  // angular frequency for Sin/Cos
  double phase = 0.0;
};

struct RateFunction {
  std::vector<RateTerm> terms;

  double operator()(double t) const {
    double v = 0.0;
    for (const auto& term : terms) {
      switch (term.kind) {
      case RateTerm::Kind::Const: v += term.coef; break;
      case RateTerm::Kind::Linear: v += term.coef * t; break;
      case RateTerm::Kind::Sin: v += term.coef * std::sin(term.freq * t + term.phase); break;
      case RateTerm::Kind::Cos: v += term.coef * std::cos(term.freq * t + term.phase); break;
      }
    }
    return v;
  }

  Eigen::VectorXd on(const Eigen::VectorXd& grid, double shift = 0.0) const {
    Eigen::VectorXd out(grid.size());
    for (Eigen::Index k = 0; k < grid.size(); ++k) out[k] = (*this)(grid[k] - shift);
    return out;
  }

  static RateFunction constant(double c) { return {{{RateTerm::Kind::Const, c, 0.0, 0.0}}}; }
  RateFunction& plus_linear(double slope) {
    terms.push_back({RateTerm::Kind::Linear, slope, 0.0, 0.0});
    return *this;
  }
  RateFunction& plus_sin(double amp, double freq, double phase = 0.0) {
    terms.push_back({RateTerm::Kind::Sin, amp, freq, phase});
    return *this;
  }
  RateFunction& plus_cos(double amp, double freq, double phase = 0.0) {
    terms.push_back({RateTerm::Kind::Cos, amp, freq, phase});
    return *this;
  }
};

/// Bin-centre grid t_k = start + (k + 1/2) * width.
struct TimeGrid {
  Eigen::Index bins = 100;
  double start = 0.0;
  double width = 0.01;

  Eigen::VectorXd centers() const {
    Eigen::VectorXd t(bins);
    for (Eigen::Index k = 0; k < bins; ++k) t[k] = start + (static_cast<double>(k) + 0.5) * width;
    return t;
  }
};

namespace detail {
inline void require_rates(const Eigen::VectorXd& p, const std::string& what) {
  for (Eigen::Index t = 0; t < p.size(); ++t)
    require(p[t] > 0.0 && p[t] < 1.0, what + " leaves (0, 1) at bin " + std::to_string(t) + " (value " + std::to_string(p[t]) + ")");
}
inline SpikeTrainSet wrap(std::string id, SpikeMatrix m, const TimeGrid& g) {
  SpikeTrainSet s;
  s.neuron_id = std::move(id);
  s.trials = std::move(m);
  s.bin_width = g.width;
  s.t_grid = g.centers();
  return s;
}
} // namespace detail

template <class R>
SpikeTrainSet simulate_single(const RateFunction& rate, Eigen::Index trials, const TimeGrid& grid, R& rng,
                              std::string id = "n1") {
  require(trials >= 1 && grid.bins >= 1, "simulate_single: need at least one trial and one bin");
  const Eigen::VectorXd p = rate.on(grid.centers());
  detail::require_rates(p, "rate");
  SpikeMatrix m(trials, grid.bins);
  for (Eigen::Index r = 0; r < trials; ++r)
    for (Eigen::Index t = 0; t < grid.bins; ++t) m(r, t) = bernoulli(rng, p[t]) ? 1 : 0;
  return detail::wrap(std::move(id), std::move(m), grid);
}

struct PairDesign {
  RateFunction rate_a;
  RateFunction rate_b;
  double zeta = 1.0;
  std::map<int, double> lag_distribution{{0, 1.0}};
  bool rate_b_follows_lag = false; // q_t = rate_b(t - L * width), i.e. q_{t+L} = rate_b(t)
  Eigen::Index trials = 40;
  TimeGrid grid;
};

template <class R>
int draw_lag(const std::map<int, double>& dist, R& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (const auto& [lag, prob] : dist) {
    acc += prob;
    if (u < acc) return lag;
  }
  return dist.rbegin()->first;
}

inline void validate_lag_distribution(const std::map<int, double>& dist, Eigen::Index bins) {
  require(!dist.empty(), "lag distribution is empty");
  double total = 0.0;
  for (const auto& [lag, prob] : dist) {
    require(prob >= 0.0, "lag distribution has a negative probability");
    require(std::abs(lag) < bins, "lag " + std::to_string(lag) + " is not smaller than the number of bins");
    total += prob;
  }
  require(std::abs(total - 1.0) < 1e-9, "lag distribution probabilities must sum to 1");
}

/// Per trial: draw L, pair bins (t, t+L) left to right over the overlap and
/// draw each pair from joint_table(p_t, q_{t+L}, zeta); bins outside the
/// overlap are drawn from their own marginal.
template <class R>
std::pair<SpikeTrainSet, SpikeTrainSet> simulate_pair(const PairDesign& d, R& rng) {
  require(d.trials >= 1 && d.grid.bins >= 1, "simulate_pair: need at least one trial and one bin");
  validate_lag_distribution(d.lag_distribution, d.grid.bins);
  require(d.zeta >= 0.0, "simulate_pair: zeta must be nonnegative");
  const Eigen::VectorXd grid = d.grid.centers();
  const Eigen::VectorXd p = d.rate_a.on(grid);
  detail::require_rates(p, "rate_a");

  std::map<int, Eigen::VectorXd> q_by_lag;
  for (const auto& [lag, prob] : d.lag_distribution) {
    Eigen::VectorXd q = d.rate_b.on(grid, d.rate_b_follows_lag ? lag * d.grid.width : 0.0);
    detail::require_rates(q, "rate_b");
    const Eigen::Index T = d.grid.bins;
    const Eigen::Index a_start = lag >= 0 ? 0 : -lag;
    for (Eigen::Index i = 0; i < T - std::abs(lag); ++i) {
      const ZetaBounds b = zeta_bounds(p[a_start + i], q[a_start + i + lag]);
      require(b.contains(d.zeta), "simulate_pair: zeta " + std::to_string(d.zeta) + " infeasible at lag " +
                                      std::to_string(lag) + ", bin " + std::to_string(a_start + i));
    }
    q_by_lag.emplace(lag, std::move(q));
  }

  const Eigen::Index T = d.grid.bins;
  SpikeMatrix ya = SpikeMatrix::Zero(d.trials, T);
  SpikeMatrix zb = SpikeMatrix::Zero(d.trials, T);
  for (Eigen::Index r = 0; r < d.trials; ++r) {
    const int lag = draw_lag(d.lag_distribution, rng);
    const Eigen::VectorXd& q = q_by_lag.at(lag);
    const Eigen::Index shift = std::abs(lag);
    const Eigen::Index a_start = lag >= 0 ? 0 : shift;
    std::vector<bool> a_done(static_cast<std::size_t>(T), false), b_done(static_cast<std::size_t>(T), false);
    for (Eigen::Index i = 0; i < T - shift; ++i) {
      const Eigen::Index ta = a_start + i;
      const Eigen::Index tb = ta + lag;
      const JointTable jt = joint_table(p[ta], q[tb], d.zeta);
      const double u = uniform01(rng);
      int y = 0, z = 0;
      if (u < jt.p11) {
        y = 1;
        z = 1;
      } else if (u < jt.p11 + jt.p10) {
        y = 1;
      } else if (u < jt.p11 + jt.p10 + jt.p01) {
        z = 1;
      }
      ya(r, ta) = static_cast<std::uint8_t>(y);
      zb(r, tb) = static_cast<std::uint8_t>(z);
      a_done[static_cast<std::size_t>(ta)] = true;
      b_done[static_cast<std::size_t>(tb)] = true;
    }
    for (Eigen::Index t = 0; t < T; ++t) {
      if (!a_done[static_cast<std::size_t>(t)]) ya(r, t) = bernoulli(rng, p[t]) ? 1 : 0;
      if (!b_done[static_cast<std::size_t>(t)]) zb(r, t) = bernoulli(rng, q[t]) ? 1 : 0;
    }
  }
  return {detail::wrap("a", std::move(ya), d.grid), detail::wrap("b", std::move(zb), d.grid)};
}

/// y_t ~ Bernoulli(p_t), z_t ~ Bernoulli(b0 + b1 y_t).
template <class R>
std::pair<SpikeTrainSet, SpikeTrainSet> simulate_regression_pair(double b0, double b1, const RateFunction& rate,
                                                                Eigen::Index trials, const TimeGrid& grid, R& rng) {
  require(b0 >= 0.0 && b0 <= 1.0 && b0 + b1 >= 0.0 && b0 + b1 <= 1.0,
          "simulate_regression_pair: b0 + b1 * y must lie in [0, 1] for y in {0, 1}");
  require(trials >= 1 && grid.bins >= 1, "simulate_regression_pair: need at least one trial and one bin");
  const Eigen::VectorXd p = rate.on(grid.centers());
  detail::require_rates(p, "rate");
  SpikeMatrix ya(trials, grid.bins), zb(trials, grid.bins);
  for (Eigen::Index r = 0; r < trials; ++r) {
    for (Eigen::Index t = 0; t < grid.bins; ++t) {
      const int y = bernoulli(rng, p[t]) ? 1 : 0;
      ya(r, t) = static_cast<std::uint8_t>(y);
      zb(r, t) = bernoulli(rng, b0 + b1 * y) ? 1 : 0;
    }
  }
  return {detail::wrap("a", std::move(ya), grid), detail::wrap("b", std::move(zb), grid)};
}

/// Each bin's n-vector is drawn from the exact 2^n FGM table (n <= 12).
template <class R>
Ensemble simulate_copula(const std::vector<RateFunction>& rates, const Eigen::VectorXd& beta, Eigen::Index trials,
                         const TimeGrid& grid, R& rng) {
  const std::size_t n = rates.size();
  require(n >= 2 && n <= 12, "simulate_copula: need between 2 and 12 neurons");
  require(beta.size() == static_cast<Eigen::Index>(pair_count(n)), "simulate_copula: beta length must be n(n-1)/2");
  require_beta_feasible(beta);
  require(trials >= 1 && grid.bins >= 1, "simulate_copula: need at least one trial and one bin");
  const Eigen::VectorXd centers = grid.centers();
  Eigen::MatrixXd p(static_cast<Eigen::Index>(n), grid.bins);
  for (std::size_t i = 0; i < n; ++i) {
    p.row(static_cast<Eigen::Index>(i)) = rates[i].on(centers).transpose();
    detail::require_rates(p.row(static_cast<Eigen::Index>(i)).transpose(), "rate " + std::to_string(i));
  }
  std::vector<SpikeMatrix> m(n, SpikeMatrix::Zero(trials, grid.bins));
  const std::uint64_t cells = std::uint64_t{1} << n;
  std::vector<double> cdf(cells);
  for (Eigen::Index t = 0; t < grid.bins; ++t) {
    const Eigen::VectorXd pt = p.col(t);
    double acc = 0.0;
    for (std::uint64_t mask = 0; mask < cells; ++mask) {
      acc += std::max(0.0, fgm_binary_pmf_fast(mask, pt, beta));
      cdf[mask] = acc;
    }
    for (Eigen::Index r = 0; r < trials; ++r) {
      const double u = uniform01(rng) * acc;
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      const auto mask = static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cells - 1)));
      for (std::size_t i = 0; i < n; ++i) m[i](r, t) = static_cast<std::uint8_t>((mask >> i) & 1U);
    }
  }
  Ensemble e;
  for (std::size_t i = 0; i < n; ++i) e.neurons.push_back(detail::wrap("n" + std::to_string(i + 1), std::move(m[i]), grid));
  return e;
}

/// Flips every bin independently with probability `noise_rate` (0 to 10%).
template <class R>
SpikeTrainSet sensitivity_noise(const SpikeTrainSet& data, double noise_rate, R& rng) {
  require(noise_rate >= 0.0 && noise_rate <= 0.1, "sensitivity_noise: noise rate must lie in [0, 0.1]");
  SpikeTrainSet out = data;
  if (noise_rate == 0.0) return out;
  for (Eigen::Index r = 0; r < out.trial_count(); ++r)
    for (Eigen::Index t = 0; t < out.bin_count(); ++t)
      if (bernoulli(rng, noise_rate)) out.trials(r, t) = static_cast<std::uint8_t>(1 - out.trials(r, t));
  return out;
}

} // namespace spikesync
