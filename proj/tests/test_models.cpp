#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "nsrds/error.hpp"
#include "nsrds/models.hpp"

namespace nsrds {
namespace {

const PhaseSpace kUnit = PhaseSpace::interval(0.0, 1.0);
const PhaseSpace kProj = PhaseSpace::projective_line();

Mat2 random_sl2(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (;;) {
    Mat2 m{u(rng), u(rng), u(rng), u(rng)};
    const double det = m.det();
    if (std::abs(det) < 0.1) continue;
    if (det < 0) std::swap(m.a, m.b), std::swap(m.c, m.d);
    const double s = 1.0 / std::sqrt(std::abs(m.det()));
    return {m.a * s, m.b * s, m.c * s, m.d * s};
  }
}

TEST(ApplyMapTest, AffineExamples) {
  EXPECT_NEAR(apply_map(AffineMap{1.0 / 3, 0.0}, kUnit, 0.9), 0.3, 1e-15);
  EXPECT_NEAR(apply_map(AffineMap{1.0 / 3, 2.0 / 3}, kUnit, 0.0), 2.0 / 3, 1e-15);
}

TEST(ApplyMapTest, MoebiusIdentityAndRotation) {
  for (double t : {0.0, 0.3, 1.2, 3.0}) {
    EXPECT_NEAR(apply_map(MoebiusMap{Mat2::identity()}, kProj, t), t, 1e-15);
    EXPECT_NEAR(kProj.distance(apply_map(MoebiusMap{Mat2::rotation(0.5)}, kProj, t),
                               kProj.normalize(t + 0.5)),
                0.0, 1e-12);
  }
  // diag(2, 1/2) fixes both axes.
  EXPECT_NEAR(apply_map(MoebiusMap{Mat2::diag(2.0)}, kProj, 0.0), 0.0, 1e-15);
  EXPECT_NEAR(apply_map(MoebiusMap{Mat2::diag(2.0)}, kProj, kPi / 2), kPi / 2, 1e-15);
}

TEST(ApplyMapTest, PermutationAndRotation) {
  const auto fs = PhaseSpace::finite_set({"x", "y", "z"}, {{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
  EXPECT_EQ(apply_map(PermutationMap{{2, 0, 1}}, fs, 0.0), 2.0);
  EXPECT_NEAR(apply_map(RotationMap{0.25}, kUnit, 0.9), 0.15, 1e-15);
  EXPECT_NEAR(apply_map(RotationMap{0.5}, kProj, 0.1), 0.1 + kPi / 2, 1e-15);
}

TEST(MapDistributionTest, Validation) {
  EXPECT_THROW(MapDistribution(kUnit, {{AffineMap{0.5, 0.0}, 0.5}, {AffineMap{0.5, 0.5}, 0.4}}),
               Error);
  EXPECT_THROW(MapDistribution(kUnit, {{MoebiusMap{}, 1.0}}), Error);
  EXPECT_THROW(MapDistribution(kUnit, {{AffineMap{0.5, 0.8}, 1.0}}), Error);  // leaves [0,1]
  const auto fs = PhaseSpace::two_point();
  EXPECT_THROW(MapDistribution(fs, {{PermutationMap{{0, 0}}, 1.0}}), Error);
}

TEST(MapDistributionTest, SelectIsInverseCdfInFileOrder) {
  const auto d = cantor_ifs(0.3);
  EXPECT_EQ(d.select(0.0), 0u);
  EXPECT_EQ(d.select(0.2999), 0u);
  EXPECT_EQ(d.select(0.3), 1u);
  EXPECT_EQ(d.select(0.9999), 1u);
}

TEST(CantorTest, Constructor) {
  const auto d = cantor_ifs(0.3);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d.atoms()[0].prob, 0.3);
  EXPECT_DOUBLE_EQ(d.atoms()[1].prob, 0.7);
  EXPECT_DOUBLE_EQ(d.lipschitz_bound(), 1.0 / 3);
  EXPECT_NO_THROW(cantor_ifs(1.0));
  EXPECT_THROW(cantor_ifs(1.1), Error);
}

TEST(AffineProperty, ContractionFuzz) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto d = cantor_ifs(0.5);
  for (int rep = 0; rep < 10000; ++rep) {
    const double x = u(rng);
    const double y = u(rng);
    for (const auto& atom : d.atoms()) {
      EXPECT_LE(std::abs(apply_map(atom, kUnit, x) - apply_map(atom, kUnit, y)),
                d.lipschitz_bound() * std::abs(x - y) + 1e-15);
    }
  }
}

TEST(MoebiusProperty, Homeomorphism) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, kPi);
  for (int rep = 0; rep < 1000; ++rep) {
    const Mat2 m = random_sl2(rng);
    const double t = u(rng);
    const double there = apply_map(MoebiusMap{m}, kProj, t);
    const double back = apply_map(invert_map(MoebiusMap{m}), kProj, there);
    EXPECT_LT(kProj.distance(back, t), 1e-9);
  }
}

// Mildly hyperbolic steps keep the renormalized determinant representable.
Mat2 near_rotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return Mat2::rotation(u(rng) * kPi) * Mat2::diag(1.0 + 0.05 * u(rng));
}

TEST(Mat2Test, ProductTracksDeterminant) {
  std::mt19937_64 rng(14);
  ProjectiveProduct prod;
  Mat2 plain;
  for (int k = 0; k < 1000; ++k) {
    const Mat2 step = near_rotation(rng);
    prod.left_multiply(step);
    plain = step * plain;
  }
  EXPECT_NEAR(plain.det(), 1.0, 1e-8);
  // det(true product) = exp(2 log_scale) det(matrix).
  EXPECT_NEAR(std::log(prod.matrix().det()) + 2.0 * prod.log_scale(), 0.0, 1e-8);
}

TEST(Mat2Test, RenormalizationSurvivesStrongProducts) {
  std::mt19937_64 rng(15);
  ProjectiveProduct prod;
  for (int k = 0; k < 1000; ++k) prod.left_multiply(random_sl2(rng));
  const Mat2& m = prod.matrix();
  const double biggest = std::max({std::abs(m.a), std::abs(m.b), std::abs(m.c), std::abs(m.d)});
  EXPECT_DOUBLE_EQ(biggest, 1.0);
  EXPECT_TRUE(std::isfinite(prod.log_norm()));
  EXPECT_GT(prod.log_norm(), 0.0);
}

TEST(Mat2Test, LogNormMatchesDirectProductForShortChains) {
  ProjectiveProduct prod;
  Mat2 direct;
  for (int k = 0; k < 10; ++k) {
    const Mat2 step = Mat2::diag(1.5) * Mat2::rotation(0.3 * k);
    prod.left_multiply(step);
    direct = step * direct;
  }
  const double fro = std::sqrt(direct.a * direct.a + direct.b * direct.b +
                               direct.c * direct.c + direct.d * direct.d);
  // Operator norm of an SL2 matrix: s with s + 1/s ... from Frobenius^2 = s^2 + s^-2.
  const double s = std::sqrt((fro * fro + std::sqrt(fro * fro * fro * fro - 4.0)) / 2.0);
  EXPECT_NEAR(prod.log_norm(), std::log(s), 1e-9);
}

TEST(Mat2Test, RequireSl2) {
  EXPECT_THROW(require_sl2({2, 0, 0, 1}), Error);
  EXPECT_NO_THROW(require_sl2(Mat2::rotation(0.7)));
}

TEST(InvertMapTest, AffineIsNotInvertible) {
  try {
    invert_map(AffineMap{0.5, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNotInvertible);
    EXPECT_NE(std::string(e.what()).find("not invertible"), std::string::npos);
  }
}

TEST(SparseScheduleTest, Values) {
  EXPECT_EQ(sparse_schedule(4), (std::vector<std::int64_t>{2, 16, 512, 65536}));
  EXPECT_THROW(sparse_schedule(0), Error);
  EXPECT_THROW(sparse_schedule(8), Error);
}

TEST(MuSequenceTest, GeneratorsAreDeterministic) {
  const auto p = MuSequence::periodic({cantor_ifs(0.3), cantor_ifs(0.7)});
  EXPECT_DOUBLE_EQ(p.at(1).atoms()[0].prob, 0.3);
  EXPECT_DOUBLE_EQ(p.at(2).atoms()[0].prob, 0.7);
  EXPECT_DOUBLE_EQ(p.at(101).atoms()[0].prob, 0.3);
  EXPECT_EQ(&p.at(5), &p.at(5));
  EXPECT_THROW(p.at(0), Error);

  const MuSequence s(MuSequence::Scripted{{cantor_ifs(0.1)}, cantor_ifs(0.9)});
  EXPECT_DOUBLE_EQ(s.at(1).atoms()[0].prob, 0.1);
  EXPECT_DOUBLE_EQ(s.at(2).atoms()[0].prob, 0.9);

  const auto t = MuSequence::two_point_sparse({2, 16});
  EXPECT_FALSE(t.is_shuffle_time(1));
  EXPECT_TRUE(t.is_shuffle_time(16));
  EXPECT_EQ(t.at(3).size(), 1u);
  EXPECT_EQ(t.at(16).size(), 2u);
  EXPECT_THROW(MuSequence::two_point_sparse({16, 2}), Error);
}

TEST(FalsifierTest, UpperTriangularSharesADirection) {
  const MapDistribution d(kProj, {{MoebiusMap{{2, 1, 0, 0.5}}, 0.5},
                                  {MoebiusMap{{1, 3, 0, 1}}, 0.5}});
  const auto v = measures_condition_falsifier(d);
  ASSERT_FALSE(v.passed());
  ASSERT_EQ(v.witness.size(), 1u);
  EXPECT_LT(kProj.distance(v.witness[0], 0.0), 1e-9);
}

TEST(FalsifierTest, IdentityFails) {
  const auto v = measures_condition_falsifier(MapDistribution(kProj, {{MoebiusMap{}, 1.0}}));
  EXPECT_FALSE(v.passed());
}

TEST(FalsifierTest, RotationWithHyperbolicPasses) {
  const MapDistribution d(kProj, {{MoebiusMap{Mat2::rotation(1.0)}, 0.5},
                                  {MoebiusMap{Mat2::diag(2.0)}, 0.5}});
  EXPECT_TRUE(measures_condition_falsifier(d).passed());
}

TEST(FalsifierTest, PreservedPairFails) {
  // diag and the quarter turn both preserve the pair {0, pi/2}.
  const MapDistribution d(kProj, {{MoebiusMap{Mat2::rotation(kPi / 2)}, 0.5},
                                  {MoebiusMap{Mat2::diag(3.0)}, 0.5}});
  const auto v = measures_condition_falsifier(d);
  ASSERT_FALSE(v.passed());
  EXPECT_EQ(v.witness.size(), 2u);
}

TEST(FalsifierTest, RejectsNonMoebius) {
  EXPECT_THROW(measures_condition_falsifier(cantor_ifs(0.5)), Error);
}

}  // namespace
}  // namespace nsrds
