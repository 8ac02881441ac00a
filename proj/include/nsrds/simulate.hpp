#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nsrds/measures.hpp"
#include "nsrds/models.hpp"
#include "nsrds/observable.hpp"
#include "nsrds/propagation.hpp"

namespace nsrds {

struct Scenario {
  PhaseSpace space;
  MuSequence seq;
  // Initial measure shared by every trial. Unset means a Dirac at each
  // trial's own start point.
  std::optional<DiscreteMeasure> nu0;
  Observable observable;
  std::int64_t horizon = 1;
  std::uint32_t trials = 1;
  std::uint64_t seed = 0;
  double epsilon = 0.1;
  // Trial t starts at start_points[t % size].
  std::vector<double> start_points;
  PropagationConfig propagation;
  // Checkpoints for statistics; empty means default_grid(horizon).
  std::vector<std::int64_t> n_grid;

  void validate() const;
  double start_point(std::uint32_t trial) const;
  std::vector<std::int64_t> grid() const;
};

// {2^6, 2^7, ..., 2^floor(log2 horizon)}; {horizon} when horizon < 64.
std::vector<std::int64_t> default_grid(std::int64_t horizon);

// [x_0, ..., x_horizon]; f_n ~ mu_n is chosen by inverse-CDF sampling of
// TrialStream(seed, trial).uniform(n).
std::vector<double> simulate_orbit(const Scenario& sc, double x0,
                                   std::uint32_t trial);

// Integral of phi against each nu_k, k = 0..size-1.
std::vector<double> observable_means(const Observable& phi,
                                     const std::vector<DiscreteMeasure>& nus);

// D_n = (1/n) |sum_{k=1}^n phi(x_k) - sum_{k=1}^n int phi d nu_k| for
// n = 1..horizon (entry n-1).
std::vector<double> ergodic_deviation(const Scenario& sc,
                                      const std::vector<DiscreteMeasure>& nus,
                                      const std::vector<double>& orbit);
std::vector<double> ergodic_deviation(const Observable& phi,
                                      const std::vector<double>& means,
                                      const std::vector<double>& orbit);

// Per-start-point expectations of phi under nu_k.
struct ExpectedPath {
  std::vector<double> start_points;          // distinct, in first-use order
  std::vector<std::vector<double>> means;    // means[s][k] for k = 0..horizon
  std::vector<std::size_t> max_support;      // largest nu_k per start point

  const std::vector<double>& for_start(double x0) const;
};

// Propagates nu_k once per distinct start point (or once for an explicit
// nu0) and records int phi d nu_k.
ExpectedPath prepare_expected(const Scenario& sc);

struct DeviationSeries {
  std::vector<std::int64_t> n_grid;
  std::vector<std::vector<double>> per_trial;  // [trial][grid index]
  std::vector<double> mean;
  std::vector<double> q05;
  std::vector<double> q50;
  std::vector<double> q95;
  std::vector<double> exceed_prob;
  std::vector<std::uint32_t> exceed_count;
  double epsilon = 0.0;
  double bound = 1.0;  // M = max(1, sup |phi|)
};

DeviationSeries deviation_series(const Scenario& sc, const ExpectedPath& expected,
                                 const std::vector<std::int64_t>& n_grid);
DeviationSeries deviation_series(const Scenario& sc);

// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double q);

// Exceedance counts below this are censored out of the fit.
inline constexpr std::uint32_t kMinExceedances = 5;

struct LdFit {
  double epsilon = 0.0;
  std::uint32_t trials = 0;
  std::vector<std::int64_t> n_grid;
  std::vector<std::uint32_t> exceed_count;
  std::vector<double> exceed_prob;
  std::vector<double> log_exceed;  // NaN where the probability is zero
  std::vector<bool> used;          // entry entered the fit
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;           // +inf with fewer than three points

  std::size_t used_points() const;
  // True when the fit shows decay: slope < 0 and |slope| > 2 se.
  bool significant_decay() const;
  // True when no trial exceeds epsilon at any grid n > n_min.
  bool no_exceedances_beyond(std::int64_t n_min) const;
};

// Least squares of log P(D_n > eps) against n over uncensored grid points.
LdFit ld_fit(const DeviationSeries& series, std::uint32_t trials);
LdFit ld_estimate(const Scenario& sc, const ExpectedPath& expected,
                  const std::vector<std::int64_t>& n_grid);

struct TwoPointProfile {
  // prob[m] = P(d(F_m x, F_m y) < epsilon), F_m = f_m o ... o f_1.
  std::vector<double> prob;
  double epsilon = 0.0;

  // Smallest m with prob[m] >= level.
  std::optional<std::int64_t> first_reaching(double level) const;
};

TwoPointProfile two_point_profile(const MuSequence& seq, double x, double y,
                                  std::int64_t m, std::uint32_t trials,
                                  std::uint64_t seed, double epsilon);
double two_point_contraction(const MuSequence& seq, double x, double y,
                             std::int64_t m, std::uint32_t trials,
                             std::uint64_t seed, double epsilon);

}  // namespace nsrds
