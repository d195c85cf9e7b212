#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "spikesync/pairwise.hpp"
#include "spikesync/random.hpp"
#include "spikesync/simulate.hpp"

using namespace spikesync;

namespace {

SpikeTrainSet random_train(Rng& rng, Eigen::Index trials, Eigen::Index bins, double p, const char* id) {
  SpikeMatrix m(trials, bins);
  for (Eigen::Index r = 0; r < trials; ++r)
    for (Eigen::Index t = 0; t < bins; ++t) m(r, t) = bernoulli(rng, p) ? 1 : 0;
  return make_spike_train(id, m);
}

// trial-by-trial evaluation straight from the joint table
double brute_force_loglik(const LatentPath& u, const LatentPath& v, double zeta, int lag, const SpikeTrainSet& a,
                          const SpikeTrainSet& b) {
  double ll = 0.0;
  const Eigen::Index T = a.bin_count();
  for (Eigen::Index r = 0; r < a.trial_count(); ++r) {
    std::vector<bool> a_used(T, false), b_used(T, false);
    for (Eigen::Index t = 0; t < T; ++t) {
      const Eigen::Index s = t + lag;
      if (s < 0 || s >= T) continue;
      a_used[t] = b_used[s] = true;
      const JointTable j = joint_table(logistic(u[t]), logistic(v[s]), zeta);
      const int y = a.trials(r, t), z = b.trials(r, s);
      ll += std::log(y ? (z ? j.p11 : j.p10) : (z ? j.p01 : j.p00));
    }
    for (Eigen::Index t = 0; t < T; ++t) {
      if (!a_used[t]) ll += std::log(a.trials(r, t) ? logistic(u[t]) : 1.0 - logistic(u[t]));
      if (!b_used[t]) ll += std::log(b.trials(r, t) ? logistic(v[t]) : 1.0 - logistic(v[t]));
    }
  }
  return ll;
}

} // namespace

TEST(JointTable, SumsToOneWithRequestedMargins) {
  Rng rng = make_stream(11, 0);
  for (int i = 0; i < 200; ++i) {
    const double p = uniform(rng, 0.01, 0.99), q = uniform(rng, 0.01, 0.99);
    const ZetaBounds b = zeta_bounds(p, q);
    const double z = uniform(rng, b.lo, b.hi);
    const JointTable j = joint_table(p, q, z);
    EXPECT_NEAR(j.sum(), 1.0, 1e-12);
    EXPECT_NEAR(j.p11 + j.p10, p, 1e-12);
    EXPECT_NEAR(j.p11 + j.p01, q, 1e-12);
    EXPECT_NEAR(j.p11, p * q * z, 1e-12);
    EXPECT_GE(std::min({j.p11, j.p10, j.p01, j.p00}), 0.0);
  }
}

TEST(JointTable, BoundsAreTight) {
  const double p = 0.7, q = 0.6;
  const ZetaBounds b = zeta_bounds(p, q);
  EXPECT_NEAR(b.lo, 0.3 / 0.42, 1e-12);
  EXPECT_NEAR(b.hi, 0.6 / 0.42, 1e-12);
  EXPECT_NEAR(joint_table(p, q, b.lo).p00, 0.0, 1e-12);
  EXPECT_NEAR(joint_table(p, q, b.hi).p01, 0.0, 1e-12);
  EXPECT_THROW(joint_table(p, q, b.hi * 1.01), ValidationError);
  EXPECT_THROW(joint_table(p, q, b.lo * 0.99), ValidationError);
  EXPECT_THROW(zeta_bounds(0.0, 0.5), ValidationError);
}

TEST(PairLikelihood, MatchesBruteForceAtEveryLag) {
  Rng rng = make_stream(12, 0);
  const auto a = random_train(rng, 9, 12, 0.3, "a");
  const auto b = random_train(rng, 9, 12, 0.25, "b");
  const int K = 3;
  for (int rep = 0; rep < 10; ++rep) {
    const LatentPath u = -1.0 + 0.4 * standard_normal_vector(rng, 12).array();
    const LatentPath v = -1.0 + 0.4 * standard_normal_vector(rng, 12).array();
    for (int lag = -K; lag <= K; ++lag) {
      const PairwiseData d(a, b, K);
      const ZetaBounds range = feasible_zeta_range(d.at(lag), u, v);
      const double zeta = uniform(rng, range.lo, std::min(range.hi, 3.0));
      EXPECT_NEAR(pair_loglik_at_lag(u, v, zeta, lag, a, b, K), brute_force_loglik(u, v, zeta, lag, a, b), 1e-9)
          << "lag " << lag;
    }
  }
}

TEST(PairLikelihood, IndependenceReducesToMarginals) {
  Rng rng = make_stream(13, 0);
  const auto a = random_train(rng, 20, 15, 0.2, "a");
  const auto b = random_train(rng, 20, 15, 0.4, "b");
  const LatentPath u = standard_normal_vector(rng, 15), v = standard_normal_vector(rng, 15);
  for (int lag : {-2, 0, 4})
    EXPECT_NEAR(pair_loglik_at_lag(u, v, 1.0, lag, a, b, 4), bernoulli_loglik(u, a) + bernoulli_loglik(v, b), 1e-9);
}

TEST(PairLikelihood, InfeasibleZetaIsRejected) {
  Rng rng = make_stream(14, 0);
  const auto a = random_train(rng, 5, 6, 0.5, "a");
  const auto b = random_train(rng, 5, 6, 0.5, "b");
  const LatentPath u = LatentPath::Zero(6), v = LatentPath::Zero(6);
  EXPECT_THROW(pair_loglik_at_lag(u, v, 2.5, 0, a, b, 1), ValidationError);
  EXPECT_THROW(pair_loglik_at_lag(u, v, 1.0, 2, a, b, 1), ValidationError);
}

TEST(ZetaProfile, AgreesWithFullLikelihood) {
  Rng rng = make_stream(15, 0);
  const auto a = random_train(rng, 30, 20, 0.3, "a");
  const auto b = random_train(rng, 30, 20, 0.3, "b");
  const PairwiseData d(a, b, 2);
  const LatentPath u = -0.8 + 0.3 * standard_normal_vector(rng, 20).array();
  const LatentPath v = -0.8 + 0.3 * standard_normal_vector(rng, 20).array();
  for (int lag = -2; lag <= 2; ++lag) {
    const ZetaProfile f(d.at(lag), u, v, d.trials());
    for (double z : {0.5, 1.0, 1.4, 0.99 * f.range().hi})
      EXPECT_NEAR(f(z), pair_loglik_counts(d.at(lag), u, v, z, d.trials()), 1e-8);
  }
}

TEST(ZetaProfile, IntegralMatchesFineQuadrature) {
  Rng rng = make_stream(16, 0);
  const auto a = random_train(rng, 40, 30, 0.3, "a");
  const auto b = random_train(rng, 40, 30, 0.3, "b");
  const PairwiseData d(a, b, 1);
  const LatentPath u = LatentPath::Constant(30, logit(0.3)), v = LatentPath::Constant(30, logit(0.3));
  const ZetaProfile f(d.at(0), u, v, d.trials());
  // midpoint rule over the whole feasible range, relative to the value at 1
  const int n = 200000;
  const double h = (f.range().hi - f.range().lo) / n;
  const double ref = f(1.0);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(f(f.range().lo + (i + 0.5) * h) - ref);
  EXPECT_NEAR(log_integrated_likelihood(f), ref + std::log(s * h), 1e-4);
}

TEST(LagPosterior, PeaksAtTheSimulatedLag) {
  Rng rng = make_stream(17, 0);
  PairDesign design;
  design.rate_a = RateFunction::constant(0.25);
  design.rate_b = RateFunction::constant(0.25);
  design.zeta = 2.0;
  design.lag_distribution = {{2, 1.0}};
  design.trials = 60;
  design.grid = TimeGrid{40, 0.0, 0.025};
  auto [a, b] = simulate_pair(design, rng);
  const PairwiseData d(a, b, 4);
  const LatentPath u = LatentPath::Constant(40, logit(0.25));
  const Eigen::VectorXd w = lag_marginal_posterior(d, u, u);
  ASSERT_EQ(w.size(), 9);
  EXPECT_NEAR(w.sum(), 1.0, 1e-12);
  Eigen::Index best = 0;
  w.maxCoeff(&best);
  EXPECT_EQ(static_cast<int>(best) - 4, 2);
}

TEST(SynchronyDecision, UsesEqualTailedInterval) {
  std::vector<double> draws(1000);
  for (std::size_t i = 0; i < draws.size(); ++i) draws[i] = 1.05 + 0.1 * (static_cast<double>(i) / 999.0);
  EXPECT_TRUE(synchrony_decision(draws));
  for (auto& x : draws) x -= 0.1;
  EXPECT_FALSE(synchrony_decision(draws));
  EXPECT_THROW(synchrony_decision(std::vector<double>(10, 1.0)), ValidationError);
}

TEST(FitPair, ShortChainIsReproducible) {
  Rng rng = make_stream(18, 0);
  PairDesign design;
  design.rate_a = RateFunction::constant(0.3);
  design.rate_b = RateFunction::constant(0.3);
  design.zeta = 1.5;
  design.trials = 30;
  design.grid = TimeGrid{20, 0.0, 0.01};
  auto [a, b] = simulate_pair(design, rng);
  SamplerConfig cfg;
  cfg.burn_in = 100;
  cfg.draws = 200;
  cfg.max_lag = 2;
  const PairFitResult r1 = fit_pair(a, b, cfg);
  const PairFitResult r2 = fit_pair(a, b, cfg);
  EXPECT_EQ(r1.chain.draws, r2.chain.draws);
  EXPECT_EQ(r1.chain.draws.rows(), 200);
  double mass = 0.0;
  for (const auto& [k, m] : r1.lag_posterior) mass += m;
  EXPECT_NEAR(mass, 1.0, 1e-9);
  EXPECT_GT(r1.zeta_median, 1.0);
}
