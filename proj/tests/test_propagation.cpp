#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nsrds/error.hpp"
#include "nsrds/propagation.hpp"
#include "support.hpp"

namespace nsrds {
namespace {

const PhaseSpace kUnit = PhaseSpace::interval(0.0, 1.0);
const PhaseSpace kProj = PhaseSpace::projective_line();

PropagationConfig merge_only(std::size_t cap = 1 << 16) {
  PropagationConfig cfg;
  cfg.max_support = cap;
  cfg.prune = PropagationConfig::MergeDuplicates{};
  return cfg;
}

void expect_measure(const DiscreteMeasure& got, std::vector<double> support,
                    std::vector<double> weights) {
  const auto c = got.canonical();
  ASSERT_EQ(c.size(), support.size());
  for (std::size_t i = 0; i < support.size(); ++i) {
    EXPECT_NEAR(c.support()[i], support[i], 1e-15);
    EXPECT_NEAR(c.weights()[i], weights[i], 1e-15);
  }
}

TEST(ConvolveTest, CantorFromDirac) {
  const PropagationConfig cfg;
  const auto one = convolve_step(cantor_ifs(0.5), DiscreteMeasure::dirac(kUnit, 0.0), cfg);
  expect_measure(one, {0.0, 2.0 / 3}, {0.5, 0.5});
  const auto two = convolve_step(cantor_ifs(0.5), one, cfg);
  expect_measure(two, {0.0, 2.0 / 9, 2.0 / 3, 8.0 / 9}, {0.25, 0.25, 0.25, 0.25});
}

TEST(ConvolveTest, IdentityLeavesMeasure) {
  std::mt19937_64 rng(1);
  const auto nu = testing::random_measure(kProj, rng, 3, 6).canonical();
  const auto out = convolve_step(MapDistribution::identity(kProj), nu, PropagationConfig{});
  EXPECT_NEAR(wasserstein(out, nu), 0.0, 1e-15);
}

TEST(ConvolveTest, SupportOverflowIsAnError) {
  std::vector<double> pts;
  for (int i = 0; i < 40; ++i) pts.push_back(i / 40.0);
  const auto nu = DiscreteMeasure::uniform(kUnit, pts);
  try {
    convolve_step(cantor_ifs(0.5), nu, merge_only(64));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSupportOverflow);
    EXPECT_NE(std::string(e.what()).find("support overflow"), std::string::npos);
  }
}

TEST(ConvolveTest, TruncationDropsLightAtoms) {
  PropagationConfig cfg;
  cfg.prune = PropagationConfig::WeightTruncate{1e-6};
  const MapDistribution skew(kUnit, {{AffineMap{0.5, 0.0}, 1.0 - 1e-7}, {AffineMap{0.5, 0.5}, 1e-7}});
  const auto out = convolve_step(skew, DiscreteMeasure::dirac(kUnit, 0.2), cfg);
  expect_measure(out, {0.1}, {1.0});
  PropagationConfig bad;
  bad.prune = PropagationConfig::WeightTruncate{1e-3};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(ConvolveTest, ResampleCapsSupportAndIsReproducible) {
  PropagationConfig cfg;
  cfg.max_support = 64;
  cfg.prune = PropagationConfig::SystematicResample{64};
  cfg.resample_seed = 3;
  auto nu = DiscreteMeasure::dirac(kUnit, 0.0);
  auto again = nu;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    nu = convolve_step(cantor_ifs(0.3), nu, cfg, s);
    again = convolve_step(cantor_ifs(0.3), again, cfg, s);
    EXPECT_LE(nu.size(), 64u);
    EXPECT_NEAR(nu.total_mass(), 1.0, 1e-12);
  }
  EXPECT_EQ(wasserstein(nu, again), 0.0);
  // Systematic resampling keeps the mean within one grid cell.
  const auto exact = propagate(MuSequence::constant(cantor_ifs(0.3)),
                               DiscreteMeasure::dirac(kUnit, 0.0), 10, merge_only());
  EXPECT_LT(wasserstein(nu, exact.back()), 1.0 / 64);
}

TEST(PropagateTest, ShapesAndMassConservation) {
  const auto seq = MuSequence::periodic({cantor_ifs(0.3), cantor_ifs(0.8)});
  const auto nus = propagate(seq, DiscreteMeasure::dirac(kUnit, 0.0), 8, PropagationConfig{});
  ASSERT_EQ(nus.size(), 9u);
  EXPECT_EQ(nus[0].size(), 1u);
  EXPECT_EQ(nus[2].size(), 4u);
  for (const auto& nu : nus) EXPECT_NEAR(nu.total_mass(), 1.0, 1e-12);
  EXPECT_EQ(propagate(seq, nus[0], 0, PropagationConfig{}).size(), 1u);
}

TEST(PropagateTest, TwoPointSparseReachesHalfHalf) {
  const auto seq = MuSequence::two_point_sparse(sparse_schedule(3));
  const auto space = PhaseSpace::two_point();
  const auto nus = propagate(seq, DiscreteMeasure::dirac(space, 0.0), 40, PropagationConfig{});
  for (std::size_t n = 0; n < nus.size(); ++n) {
    const auto c = nus[n].canonical();
    if (n < 2) {
      EXPECT_EQ(c.size(), 1u);
    } else {
      ASSERT_EQ(c.size(), 2u);
      EXPECT_DOUBLE_EQ(c.weights()[0], 0.5);
    }
  }
}

TEST(GapTest, Examples) {
  std::mt19937_64 rng(2);
  const auto a = testing::random_measure(kUnit, rng, 2, 4);
  const auto b = testing::random_measure(kUnit, rng, 2, 4);
  const auto cantor = MuSequence::constant(cantor_ifs(0.5));
  EXPECT_EQ(standing_assumption_gap(cantor, 5, 0, a, b, PropagationConfig{}), wasserstein(a, b));
  EXPECT_LE(standing_assumption_gap(cantor, 5, 3, a, b, PropagationConfig{}),
            wasserstein(a, b) / 27 + 1e-15);

  const auto space = PhaseSpace::two_point();
  const auto sparse = MuSequence::two_point_sparse(sparse_schedule(3));
  const auto pa = DiscreteMeasure::dirac(space, 0.0);
  const auto pb = DiscreteMeasure::dirac(space, 1.0);
  EXPECT_EQ(standing_assumption_gap(sparse, 3, 13, pa, pb, PropagationConfig{}), 0.0);
  EXPECT_EQ(standing_assumption_gap(sparse, 3, 12, pa, pb, PropagationConfig{}), 1.0);
}

TEST(GapTest, SeriesStopsEarly) {
  const auto cantor = MuSequence::constant(cantor_ifs(0.5));
  const auto gaps = standing_assumption_gaps(cantor, 0, 50, DiscreteMeasure::dirac(kUnit, 0.0),
                                             DiscreteMeasure::dirac(kUnit, 1.0),
                                             PropagationConfig{}, 1e-3);
  EXPECT_LT(gaps.size(), 51u);
  EXPECT_LE(gaps.back(), 1e-3);
  for (std::size_t m = 0; m < gaps.size(); ++m) {
    EXPECT_LE(gaps[m], std::pow(1.0 / 3, static_cast<double>(m)) + 1e-12);
  }
}

// W(mu * nu, mu * nu') <= sum gamma(x, y) W(mu * delta_x, mu * delta_y) for
// the optimal plan gamma between nu and nu'.
TEST(GapProperty, Convexity) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 40; ++rep) {
    const double p = u(rng);
    const MapDistribution mu(kProj, {{MoebiusMap{Mat2::rotation(u(rng) * 3)}, p},
                                     {MoebiusMap{Mat2::diag(1.0 + u(rng))}, 1.0 - p}});
    const auto nu = testing::random_measure(kProj, rng, 2, 4);
    const auto nu2 = testing::random_measure(kProj, rng, 2, 4);
    const auto plan = wasserstein_oracle(nu, nu2);
    const PropagationConfig cfg = merge_only();
    double bound = 0.0;
    for (std::size_t i = 0; i < plan.matrix.size(); ++i) {
      for (std::size_t j = 0; j < plan.matrix[i].size(); ++j) {
        if (plan.matrix[i][j] == 0.0) continue;
        bound += plan.matrix[i][j] *
                 wasserstein(convolve_step(mu, DiscreteMeasure::dirac(kProj, plan.row_measure.support()[i]), cfg),
                             convolve_step(mu, DiscreteMeasure::dirac(kProj, plan.col_measure.support()[j]), cfg));
      }
    }
    EXPECT_LE(wasserstein(convolve_step(mu, nu, cfg), convolve_step(mu, nu2, cfg)),
              bound + 1e-9);
  }
}

TEST(GapProperty, NonExpansionByLipschitzFactor) {
  std::mt19937_64 rng(6);
  const auto mu = cantor_ifs(0.4);
  for (int rep = 0; rep < 50; ++rep) {
    const auto a = testing::random_measure(kUnit, rng, 1, 5);
    const auto b = testing::random_measure(kUnit, rng, 1, 5);
    EXPECT_LE(wasserstein(convolve_step(mu, a, merge_only()), convolve_step(mu, b, merge_only())),
              mu.lipschitz_bound() * wasserstein(a, b) + 1e-12);
  }
}

TEST(BackwardTest, IdentityAndRotationKeepGrid) {
  const auto grid = lebesgue_grid(kProj, 16);
  EXPECT_EQ(grid.size(), 16u);
  const auto id = backward_propagate(MuSequence::constant(MapDistribution::identity(kProj)), 4,
                                     PropagationConfig{}, 16);
  for (const auto& m : id) EXPECT_NEAR(wasserstein(m, grid), 0.0, 1e-15);

  const auto rot = backward_propagate(
      MuSequence::constant(MapDistribution(kProj, {{RotationMap{0.1}, 1.0}})), 3,
      PropagationConfig{}, 16);
  for (const auto& m : rot) {
    const auto c = m.canonical();
    ASSERT_EQ(c.size(), 16u);
    for (double w : c.weights()) EXPECT_NEAR(w, 1.0 / 16, 1e-15);
  }
}

TEST(BackwardTest, AffineIsNotInvertible) {
  EXPECT_THROW(backward_propagate(MuSequence::constant(cantor_ifs(0.5)), 2, PropagationConfig{}),
               Error);
}

TEST(MartingaleTest, IdentityIsExact) {
  const auto seq = MuSequence::constant(MapDistribution::identity(kProj));
  const auto r = martingale_check(seq, 2, 3, Arc{0.2, 1.7}, 0, 0, PropagationConfig{});
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.lhs, r.rhs);
}

TEST(MartingaleTest, ExactEnumerationOnSl2Steps) {
  const MapDistribution mu(kProj, {{MoebiusMap{Mat2::rotation(1.0)}, 0.4},
                                   {MoebiusMap{Mat2::diag(2.0)}, 0.6}});
  const auto seq = MuSequence::constant(mu);
  const auto inverse = backward_propagate(seq, 5, merge_only(), 64);
  for (std::int64_t i = 1; i <= 5; ++i) {
    const auto r = martingale_check(seq, inverse, i, Arc{0.0, kPi / 4}, 0, 0);
    EXPECT_NEAR(r.lhs, r.rhs, 1e-9);
  }
}

TEST(MartingaleTest, MonteCarloAgreesWithinStandardErrors) {
  const MapDistribution mu(kProj, {{MoebiusMap{Mat2::rotation(1.0)}, 0.5},
                                   {MoebiusMap{Mat2::diag(2.0)}, 0.5}});
  const auto seq = MuSequence::constant(mu);
  const auto inverse = backward_propagate(seq, 3, merge_only(), 64);
  const auto r = martingale_check(seq, inverse, 2, Arc{0.3, 1.4}, 4000, 9);
  EXPECT_FALSE(r.exact);
  EXPECT_GT(r.se, 0.0);
  EXPECT_LT(std::abs(r.lhs - r.rhs), 4.0 * r.se + 1e-12);
}

TEST(MartingaleTest, RequiresProjectiveLine) {
  const auto seq = MuSequence::constant(MapDistribution(kUnit, {{RotationMap{0.2}, 1.0}}));
  EXPECT_THROW(martingale_check(seq, 1, 2, Arc{0.1, 0.2}, 0, 0, PropagationConfig{}), Error);
}

}  // namespace
}  // namespace nsrds
