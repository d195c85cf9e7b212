#include <cmath>

#include <gtest/gtest.h>

#include "spikesync/copula.hpp"
#include "spikesync/pairwise.hpp"
#include "spikesync/random.hpp"
#include "spikesync/simulate.hpp"

using namespace spikesync;

namespace {

Eigen::VectorXd random_beta(Rng& rng, Eigen::Index pairs, double radius) {
  Eigen::VectorXd b = standard_normal_vector(rng, pairs);
  return b * (radius / b.lpNorm<1>());
}

std::vector<int> bits(std::uint64_t mask, std::size_t n) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>((mask >> i) & 1U);
  return y;
}

} // namespace

TEST(PairIndex, RoundTrips) {
  for (std::size_t n = 2; n <= 8; ++n) {
    for (std::size_t k = 0; k < pair_count(n); ++k) {
      const auto [j1, j2] = pair_of_index(k, n);
      EXPECT_LT(j1, j2);
      EXPECT_EQ(pair_index(j1, j2, n), k);
    }
    EXPECT_EQ(neurons_for_pairs(pair_count(n)), n);
  }
}

TEST(FgmCdf, IndependenceAndMargins) {
  Eigen::VectorXd F(3);
  F << 0.3, 0.6, 0.8;
  EXPECT_NEAR(fgm_cdf(F, Eigen::VectorXd::Zero(3)), 0.3 * 0.6 * 0.8, 1e-15);
  Eigen::VectorXd one = F;
  one[1] = 1.0;
  one[2] = 1.0;
  EXPECT_NEAR(fgm_cdf(one, Eigen::Vector3d(0.4, -0.3, 0.2)), 0.3, 1e-15);
}

TEST(FgmPmf, EnumerationSumsToOneAndKeepsMargins) {
  Rng rng = make_stream(21, 0);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 2 + static_cast<std::size_t>(rep % 4);
    Eigen::VectorXd p(static_cast<Eigen::Index>(n));
    for (auto& x : p) x = uniform(rng, 0.02, 0.98);
    const Eigen::VectorXd beta = random_beta(rng, static_cast<Eigen::Index>(pair_count(n)), uniform(rng, 0.0, 1.0));
    double total = 0.0;
    Eigen::VectorXd margin = Eigen::VectorXd::Zero(p.size());
    for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
      const double v = fgm_binary_pmf(bits(mask, n), p, beta);
      EXPECT_GE(v, -1e-12);
      EXPECT_NEAR(v, fgm_binary_pmf_fast(mask, p, beta), 1e-13);
      total += v;
      for (std::size_t i = 0; i < n; ++i)
        if ((mask >> i) & 1U) margin[static_cast<Eigen::Index>(i)] += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_LT((margin - p).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(FgmPmf, PairCaseMatchesJointTable) {
  Rng rng = make_stream(22, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const double p = uniform(rng, 0.02, 0.98), q = uniform(rng, 0.02, 0.98);
    const double b = uniform(rng, -1.0, 1.0);
    const double z = zeta_from_beta(b, p, q);
    EXPECT_NEAR(beta_from_zeta(z, p, q), b, 1e-12);
    const JointTable j = joint_table(p, q, z);
    const Eigen::Vector2d pv(p, q);
    const Eigen::VectorXd bv = Eigen::VectorXd::Constant(1, b);
    EXPECT_NEAR(fgm_binary_pmf({1, 1}, pv, bv), j.p11, 1e-12);
    EXPECT_NEAR(fgm_binary_pmf({1, 0}, pv, bv), j.p10, 1e-12);
    EXPECT_NEAR(fgm_binary_pmf({0, 1}, pv, bv), j.p01, 1e-12);
    EXPECT_NEAR(fgm_binary_pmf({0, 0}, pv, bv), j.p00, 1e-12);
  }
}

TEST(FgmPmf, RejectsInfeasibleBeta) {
  const Eigen::Vector2d p(0.3, 0.4);
  EXPECT_THROW(fgm_binary_pmf({1, 1}, p, Eigen::VectorXd::Constant(1, 1.2)), ValidationError);
  EXPECT_THROW(fgm_binary_pmf({1}, p, Eigen::VectorXd::Constant(1, 0.2)), ValidationError);
}

TEST(CopulaLoglik, MatchesPatternEnumeration) {
  Rng rng = make_stream(23, 0);
  const TimeGrid g{8, 0.0, 0.125};
  const RateFunction r = RateFunction::constant(0.3);
  const Eigen::Vector3d beta(0.3, -0.2, 0.1);
  const Ensemble e = simulate_copula({r, r, r}, beta, 10, g, rng);
  std::vector<LatentPath> lat;
  for (int i = 0; i < 3; ++i) lat.push_back(-0.8 + 0.3 * standard_normal_vector(rng, 8).array());
  double want = 0.0;
  for (Eigen::Index rr = 0; rr < 10; ++rr)
    for (Eigen::Index t = 0; t < 8; ++t) {
      Eigen::Vector3d p;
      std::vector<int> y(3);
      for (int i = 0; i < 3; ++i) {
        p[i] = logistic(lat[static_cast<std::size_t>(i)][t]);
        y[static_cast<std::size_t>(i)] = e.neurons[static_cast<std::size_t>(i)].trials(rr, t);
      }
      want += std::log(fgm_binary_pmf(y, p, beta));
    }
  EXPECT_NEAR(copula_loglik(lat, beta, e), want, 1e-9);
}

TEST(CopulaLoglik, GradientMatchesFiniteDifferences) {
  Rng rng = make_stream(24, 0);
  const TimeGrid g{15, 0.0, 0.1};
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 2 + static_cast<std::size_t>(rep % 3);
    std::vector<RateFunction> rates(n, RateFunction::constant(uniform(rng, 0.1, 0.5)));
    const auto pairs = static_cast<Eigen::Index>(pair_count(n));
    const Ensemble e = simulate_copula(rates, random_beta(rng, pairs, 0.5), 12, g, rng);
    std::vector<LatentPath> lat;
    for (std::size_t i = 0; i < n; ++i) lat.push_back(-1.0 + 0.5 * standard_normal_vector(rng, 15).array());
    const Eigen::VectorXd beta = random_beta(rng, pairs, 0.6);
    Eigen::VectorXd g_an;
    copula_loglik(lat, beta, e, &g_an);
    for (Eigen::Index k = 0; k < pairs; ++k) {
      const double h = 1e-6;
      Eigen::VectorXd up = beta, dn = beta;
      up[k] += h;
      dn[k] -= h;
      const double fd = (copula_loglik(lat, up, e) - copula_loglik(lat, dn, e)) / (2.0 * h);
      EXPECT_NEAR(g_an[k], fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(SimulateCopula, PairFrequenciesMatchPmf) {
  Rng rng = make_stream(25, 0);
  const TimeGrid g{1, 0.0, 1.0};
  const Eigen::Vector3d beta(0.6, -0.2, 0.1);
  const std::vector<RateFunction> rates{RateFunction::constant(0.3), RateFunction::constant(0.5),
                                        RateFunction::constant(0.4)};
  const Eigen::Index R = 200000;
  const Ensemble e = simulate_copula(rates, beta, R, g, rng);
  std::array<double, 8> freq{};
  for (Eigen::Index r = 0; r < R; ++r) {
    std::size_t m = 0;
    for (std::size_t i = 0; i < 3; ++i) m |= static_cast<std::size_t>(e.neurons[i].trials(r, 0)) << i;
    freq[m] += 1.0 / static_cast<double>(R);
  }
  const Eigen::Vector3d p(0.3, 0.5, 0.4);
  for (std::uint64_t m = 0; m < 8; ++m) {
    const double want = fgm_binary_pmf(bits(m, 3), p, beta);
    EXPECT_NEAR(freq[m], want, 4.0 * std::sqrt(want * (1.0 - want) / static_cast<double>(R)));
  }
}
