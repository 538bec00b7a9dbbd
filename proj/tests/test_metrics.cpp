#include "obswin/metrics.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <random>

using namespace obswin;

namespace {

std::vector<double> tied_vector(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> levels(1, 1 + n / 4);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = levels(rng) * 0.5;
  return v;
}

}  // namespace

TEST(Ranks, TiesShareTheirMeanPosition) {
  VectorXd x(6);
  x << 10, 20, 20, 5, 20, 7;
  const VectorXd r = average_ranks(x);
  const VectorXd expected = (VectorXd(6) << 3, 5, 5, 1, 5, 2).finished();
  EXPECT_TRUE(r.isApprox(expected));
}

TEST(Spearman, MatchesRankThenPearsonOracle) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> size(3, 60);
  double worst = 0.0;
  int compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = size(rng);
    const auto x = tied_vector(rng, n);
    const auto y = tied_vector(rng, n);
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
        std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
      EXPECT_THROW(spearman(x, y), Error);
      continue;
    }
    const double got = spearman(x, y);
    const double want = oracle::spearman(x, y);
    worst = std::max(worst, std::abs(got - want));
    ++compared;
  }
  EXPECT_GT(compared, 900);
  EXPECT_LT(worst, 1e-12);
}

TEST(Spearman, Errors) {
  const std::vector<double> a{1, 2, 3}, b{1, 2};
  try {
    spearman(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
  try {
    spearman(b, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewSamples);
  }
  const std::vector<double> flat{2, 2, 2};
  try {
    spearman(a, flat);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateInput);
  }
}

TEST(SpearmanP, Limits) {
  EXPECT_DOUBLE_EQ(spearman_p(0.0, 50), 1.0);
  EXPECT_GT(spearman_p(1.0, 50), 0.0);
  EXPECT_LT(spearman_p(1.0, 50), 1e-300);
  EXPECT_DOUBLE_EQ(spearman_p(0.3, 40), spearman_p(-0.3, 40));
  EXPECT_THROW(spearman_p(0.3, 3), Error);
}

TEST(SpearmanP, AgreesWithPermutationTest) {
  const int n = 30;
  std::mt19937_64 rng(2718);
  std::vector<double> x(n), y(n);
  std::iota(x.begin(), x.end(), 1.0);
  // Find a pairing with rho close to 0.5.
  double rho = 0.0;
  std::normal_distribution<double> g;
  do {
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + 15.0 * g(rng);
    rho = spearman(x, y);
  } while (std::abs(rho - 0.5) > 0.01);

  const auto ry = oracle::ranks(y);
  std::vector<double> perm(ry.begin(), ry.end());
  // With untied ranks, rho depends only on sum of x_i * rank_i.
  const double mean = (n + 1) / 2.0;
  const double denom = n * (static_cast<double>(n) * n - 1) / 12.0;
  int extreme = 0;
  const int draws = 1000000;
  for (int d = 0; d < draws; ++d) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += (x[static_cast<std::size_t>(i)] - mean) * (perm[static_cast<std::size_t>(i)] - mean);
    if (std::abs(s / denom) >= std::abs(rho) - 1e-12) ++extreme;
  }
  const double p_perm = static_cast<double>(extreme) / draws;
  EXPECT_NEAR(spearman_p(rho, n), p_perm, 0.01);
}

TEST(Bcs, OracleAndAntiOracle) {
  const auto corpus = fixture::small_corpus(31);
  const auto& r = corpus.rating_matrix();
  const double k = corpus.scale().k_max;
  const auto oracle_store = fixture::store_from(corpus, [&](std::size_t b, std::size_t i) {
    return r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
  });
  const auto anti_store = fixture::store_from(corpus, [&](std::size_t b, std::size_t i) {
    return k + 1.0 - r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
  });
  for (const auto& b : corpus.behaviors()) {
    for (int l : WindowGrid{}.lengths) {
      for (auto f : kFunctionals) {
        const auto hit = compute_bcs(corpus, oracle_store, b, l, f);
        EXPECT_NEAR(hit.rho, 1.0, 1e-12);
        EXPECT_EQ(hit.n, static_cast<long>(corpus.size()));
        EXPECT_LT(hit.p, 1e-10);
        EXPECT_NEAR(compute_bcs(corpus, anti_store, b, l, f).rho, -1.0, 1e-12);
      }
    }
  }
}

TEST(Bcs, InvariantUnderIncreasingTransform) {
  const auto corpus = fixture::small_corpus(32);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<double> noise(corpus.size());
  for (auto& x : noise) x = g(rng);
  const auto base = fixture::store_from(corpus, [&](std::size_t b, std::size_t i) {
    return corpus.rating_matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) + 2.0 * noise[i];
  });
  const auto warped = fixture::store_from(corpus, [&](std::size_t b, std::size_t i) {
    return std::exp(corpus.rating_matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) + 2.0 * noise[i]);
  });
  for (auto f : kFunctionals) {
    EXPECT_NEAR(compute_bcs(corpus, base, "blame", 10, f).rho, compute_bcs(corpus, warped, "blame", 10, f).rho, 1e-12);
  }
}

TEST(ScoreStore, Bookkeeping) {
  ScoreStore s({"a", "b"}, {3, 10}, 2);
  EXPECT_FALSE(s.complete());
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t l = 0; l < 2; ++l)
      for (std::size_t i = 0; i < 2; ++i) s.set(b, l, i, VectorXd::Constant(3, static_cast<double>(b + l + i)));
  EXPECT_TRUE(s.complete());
  EXPECT_EQ(s.pooled(1, 1).size(), 6);
  EXPECT_EQ(s.behavior_index("b"), 1u);
  EXPECT_EQ(s.length_index(10), 1u);
  EXPECT_THROW(s.length_index(30), Error);
  EXPECT_DOUBLE_EQ(s.aggregates(1, 0, FunctionalKind::Median)(1), 2.0);
}

TEST(Brc, PublishedSolutionsAcceptancePair) {
  EXPECT_NEAR(brc_from_correlations(0.282, 0.37), 0.956, 5e-4);
  EXPECT_DOUBLE_EQ(brc_from_correlations(1.0, -1.0), 0.0);
  EXPECT_DOUBLE_EQ(brc_from_correlations(0.4, 0.4), 1.0);
}

TEST(Brc, SelfPairIsPerfectAndPairsAreSymmetric) {
  const auto corpus = fixture::small_corpus(33);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  const WindowGrid grid;
  ScoreStore store(corpus.behaviors(), grid.lengths, corpus.size());
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t l = 0; l < grid.lengths.size(); ++l)
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto n = window_bounds(corpus.interactions()[i].tokens.size(), grid.lengths[l]).size();
        VectorXd v(static_cast<Eigen::Index>(n));
        for (auto& x : v) x = 5.0 + g(rng);
        store.set(b, l, i, v);
      }
  const auto self = compute_brc_pair(corpus, store, "blame", "blame", 30);
  EXPECT_DOUBLE_EQ(self.q_star, 1.0);
  EXPECT_DOUBLE_EQ(self.q_prime, 1.0);
  EXPECT_DOUBLE_EQ(self.brc, 1.0);
  for (int l : grid.lengths) {
    const auto ab = compute_brc_pair(corpus, store, "blame", "warmth", l);
    const auto ba = compute_brc_pair(corpus, store, "warmth", "blame", l);
    EXPECT_NEAR(ab.brc, ba.brc, 1e-15);
    EXPECT_GE(ab.brc, 0.0);
    EXPECT_LE(ab.brc, 1.0);
    EXPECT_EQ(ab.n_windows, store.pooled(0, store.length_index(l)).size());
  }
}

TEST(WeightedBrc, ReferenceWeightsNormalize) {
  const std::vector<double> published{0.501, 0.499};
  const VectorXd w = reference_weights(published);
  EXPECT_DOUBLE_EQ(w(0), 0.501);
  EXPECT_DOUBLE_EQ(w(1), 0.499);
  const std::vector<double> scaled{0.6513, 0.6487};
  const VectorXd v = reference_weights(scaled);
  EXPECT_NEAR(v(0), 0.501, 1e-12);
  EXPECT_NEAR(v(1), 0.499, 1e-12);
  EXPECT_DOUBLE_EQ(v.sum(), 1.0);
  const std::vector<double> bad{0.2, -0.3};
  try {
    reference_weights(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositiveWeightMass);
  }
}

TEST(WeightedBrc, CombinesComponents) {
  const std::vector<double> one{0.7}, brc_one{0.83};
  EXPECT_DOUBLE_EQ(compute_weighted_brc(one, brc_one), 0.83);
  const std::vector<double> equal{0.6, 0.6}, brcs{0.8, 0.6};
  EXPECT_NEAR(compute_weighted_brc(equal, brcs), 0.7, 1e-15);
  const std::vector<double> uneven{0.9, 0.65}, brcs2{0.95, 0.4};
  const double w = compute_weighted_brc(uneven, brcs2);
  EXPECT_GE(w, 0.4);
  EXPECT_LE(w, 0.95);
}
