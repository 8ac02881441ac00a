#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nsrds/error.hpp"
#include "nsrds/experiments.hpp"
#include "nsrds/scenario_io.hpp"
#include "nsrds/simulate.hpp"

namespace nsrds {
namespace {

TEST(SlowDiffusionTest, SparseExhibitsCounterexample) {
  SlowDiffusionParams p;
  p.kmax = 3;
  p.trials = 500;
  p.seed = 4;
  const auto r = run_slow_diffusion(p);
  EXPECT_EQ(r.verdict, Verdict::kExhibitsCounterexample);
  EXPECT_FALSE(r.reason.empty());
}

TEST(SlowDiffusionTest, ConstantObservableIsInconclusive) {
  SlowDiffusionParams p;
  p.phi_a = p.phi_b = 0.7;
  const auto r = run_slow_diffusion(p);
  EXPECT_EQ(r.verdict, Verdict::kInconclusive);
  EXPECT_EQ(r.reason, "constant observable");
}

TEST(SlowDiffusionTest, DenseConfirms) {
  SlowDiffusionParams p;
  p.kmax = 3;
  p.trials = 200;
  p.dense = true;
  const auto r = run_slow_diffusion(p);
  EXPECT_EQ(r.verdict, Verdict::kConfirmsTheorem);
  EXPECT_NEAR(r.table("running_average").rows.back()[1], 0.5, kMidpointTolerance);
}

TEST(SlowDiffusionTest, RejectsShortSchedules) {
  SlowDiffusionParams p;
  p.kmax = 2;
  EXPECT_THROW(run_slow_diffusion(p), Error);
}

// The closed-form epoch averages must agree with stepping simulate_orbit
// through the same stream positions.
TEST(SlowDiffusionTest, MatchesStepwiseSimulation) {
  SlowDiffusionParams p;
  p.kmax = 3;
  p.trials = 40;
  p.seed = 21;
  const auto r = run_slow_diffusion(p);
  const auto space = PhaseSpace::two_point();
  const auto times = sparse_schedule(4);
  const Scenario sc{space,
                    MuSequence::two_point_sparse(sparse_schedule(3)),
                    std::nullopt,
                    Observable(space, Observable::Table{{0.0, 1.0}}),
                    times.back() - 1,
                    p.trials,
                    p.seed,
                    0.1,
                    {0.0},
                    PropagationConfig{},
                    {}};
  std::vector<std::vector<double>> avg(p.trials);
  for (std::uint32_t t = 0; t < p.trials; ++t) {
    const auto orbit = simulate_orbit(sc, 0.0, t);
    double sum = 0.0;
    std::size_t next = 0;
    for (std::int64_t n = 1; n < static_cast<std::int64_t>(orbit.size()); ++n) {
      sum += orbit[static_cast<std::size_t>(n)];
      if (n == times[next] - 1) {
        avg[t].push_back(sum / static_cast<double>(n));
        ++next;
      }
    }
  }
  const auto& tab = r.table("epoch_average");
  ASSERT_EQ(tab.rows.size(), times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<double> col;
    std::size_t low = 0;
    for (const auto& row : avg) {
      col.push_back(row[k]);
      low += row[k] <= kLowBand;
    }
    EXPECT_NEAR(tab.rows[k][1], quantile(col, 0.5), 1e-12);
    EXPECT_NEAR(tab.rows[k][2], static_cast<double>(low) / p.trials, 1e-15);
  }
}

TEST(RotationTest, IdentityHoldsAndShiftedJumps) {
  RotationParams p;
  const auto r = run_rotation_counterexample(p);
  EXPECT_EQ(r.verdict, Verdict::kExhibitsCounterexample);
  const double target = std::cos(0.0);
  for (const auto& row : r.table("identity").rows) EXPECT_LE(std::abs(row[1] - target), 1e-12);
  const auto& shifted = r.table("shifted").rows;
  ASSERT_EQ(shifted.size(), 4u);
  EXPECT_DOUBLE_EQ(shifted[0][2], 1.0);
  for (std::size_t k = 1; k < shifted.size(); ++k) EXPECT_GE(shifted[k][3], kRotationJumpThreshold);
}

TEST(RotationTest, AnyStartPoint) {
  RotationParams p;
  p.x0 = 0.3141;
  p.horizon = 2000;
  const auto r = run_rotation_counterexample(p);
  const double target = std::cos(2 * kPi * from_turns(to_turns(0.3141)));
  for (const auto& row : r.table("identity").rows) EXPECT_LE(std::abs(row[1] - target), 1e-12);
}

TEST(RotationTest, ConstantObservable) {
  RotationParams p;
  p.phi = Observable::Affine{0.25, 0.0};
  p.horizon = 100;
  const auto r = run_rotation_counterexample(p);
  EXPECT_EQ(r.verdict, Verdict::kInconclusive);
  for (const auto& row : r.table("identity").rows) EXPECT_EQ(row[1], 0.25);
}

TEST(TurnsTest, RoundTrip) {
  EXPECT_EQ(to_turns(0.0), 0u);
  EXPECT_EQ(to_turns(0.5), 1ull << 63);
  EXPECT_EQ(to_turns(1.25), 1ull << 62);
  EXPECT_DOUBLE_EQ(from_turns(1ull << 62), 0.25);
}

SaProfileParams sa_params() {
  SaProfileParams p;
  p.deltas = {0.5, 0.1, 0.01, 0.001};
  p.n_probes = {0, 3, 10};
  p.seed = 2;
  p.m_cap = 20;
  return p;
}

TEST(StandingAssumptionTest, IfsMeetsLogBound) {
  const auto rows =
      profile_standing_assumption(MuSequence::constant(cantor_ifs(0.5)), sa_params());
  for (const auto& r : rows) {
    ASSERT_TRUE(r.m.has_value());
    EXPECT_LE(*r.m, static_cast<std::int64_t>(std::ceil(std::log(r.delta) / std::log(1.0 / 3))));
  }
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(*rows[i].m, *rows[i - 1].m);
}

TEST(StandingAssumptionTest, IdentityNeverContracts) {
  const auto rows = profile_standing_assumption(
      MuSequence::constant(MapDistribution::identity(PhaseSpace::interval(0.0, 1.0))),
      sa_params());
  EXPECT_FALSE(rows.back().m.has_value());
  EXPECT_NEAR(rows.back().worst_gap, 1.0, 1e-15);
}

TEST(StandingAssumptionTest, SparseTwoPointNotUniform) {
  auto p = sa_params();
  p.n_probes = {16, 512};
  const auto rows = profile_standing_assumption(
      MuSequence::two_point_sparse(sparse_schedule(4)), p);
  for (const auto& r : rows) EXPECT_FALSE(r.m.has_value());
}

TEST(StandingAssumptionTest, RejectsIncreasingDeltas) {
  auto p = sa_params();
  p.deltas = {0.1, 0.2};
  EXPECT_THROW(profile_standing_assumption(MuSequence::constant(cantor_ifs(0.5)), p), Error);
}

TEST(StandingAssumptionTest, Probes) {
  EXPECT_EQ(standing_assumption_probes(PhaseSpace::projective_line(), 8, 1).size(), 16u);
  EXPECT_EQ(standing_assumption_probes(PhaseSpace::interval(0, 1), 8, 1).size(), 10u);
  EXPECT_EQ(standing_assumption_probes(PhaseSpace::two_point(), 0, 1).size(), 2u);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(ReportTest, RerunReproducesTablesBitwise) {
  const auto dir = std::filesystem::temp_directory_path() / "nsrds_report_test";
  std::filesystem::remove_all(dir);
  std::vector<ExperimentReport> reports;
  SlowDiffusionParams sp;
  sp.trials = 50;
  sp.seed = 8;
  reports.push_back(run_slow_diffusion(sp));
  RotationParams rp;
  rp.horizon = 300;
  reports.push_back(run_rotation_counterexample(rp));
  const auto seq = MuSequence::constant(cantor_ifs(0.5));
  reports.push_back(standing_assumption_report(seq, to_json(seq), sa_params()));
  for (const auto& r : reports) {
    write_report(r, dir / "a", kToolVersion);
    const auto doc = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
    const auto again = rerun(doc.at("scenario"));
    write_report(again, dir / "b", kToolVersion);
    for (const auto& t : r.tables) {
      EXPECT_EQ(slurp(dir / "a" / (t.name + ".csv")), slurp(dir / "b" / (t.name + ".csv")));
      EXPECT_TRUE(std::filesystem::exists(dir / "a" / "plotdata" / (t.name + "_" + t.columns[1] + ".dat")));
    }
    EXPECT_EQ(again.verdict, r.verdict);
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace nsrds
