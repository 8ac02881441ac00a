#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "nsrds/measures.hpp"
#include "nsrds/models.hpp"

namespace nsrds {

struct PropagationConfig {
  struct MergeDuplicates {};
  // Merge, then drop atoms lighter than epsilon (<= 1e-6) and renormalize.
  struct WeightTruncate {
    double epsilon = 1e-9;
  };
  // Merge, then if more than n atoms remain replace the measure by n
  // equal-weight quantile atoms at a randomly offset systematic grid.
  struct SystematicResample {
    std::size_t n = 4096;
  };
  using Prune = std::variant<MergeDuplicates, WeightTruncate, SystematicResample>;

  std::size_t max_support = 4096;
  Prune prune = WeightTruncate{};
  std::uint64_t resample_seed = 0;

  void validate() const;
};

// mu * nu: the law of f(x) with f ~ mu, x ~ nu, pruned per cfg. `step`
// keys the resampling offset so that repeated runs are reproducible.
DiscreteMeasure convolve_step(const MapDistribution& mu, const DiscreteMeasure& nu,
                              const PropagationConfig& cfg,
                              std::uint64_t step = 0);

// [nu_0, ..., nu_n] with nu_k = mu_k * nu_{k-1}.
std::vector<DiscreteMeasure> propagate(const MuSequence& seq,
                                       const DiscreteMeasure& nu0, std::int64_t n,
                                       const PropagationConfig& cfg);

// W(mu_{n+m} * ... * mu_{n+1} * nu, mu_{n+m} * ... * mu_{n+1} * nu').
double standing_assumption_gap(const MuSequence& seq, std::int64_t n,
                               std::int64_t m, const DiscreteMeasure& nu,
                               const DiscreteMeasure& nu_prime,
                               const PropagationConfig& cfg);

// The same gap for every m in [0, m_max]; stops early (shorter result) once
// the gap falls to or below `stop_below`.
std::vector<double> standing_assumption_gaps(const MuSequence& seq,
                                             std::int64_t n, std::int64_t m_max,
                                             const DiscreteMeasure& nu,
                                             const DiscreteMeasure& nu_prime,
                                             const PropagationConfig& cfg,
                                             double stop_below = -1.0);

inline constexpr std::size_t kDefaultLebesgueGrid = 512;

// Equal weights on the midpoints of a K-cell partition of the space.
DiscreteMeasure lebesgue_grid(const PhaseSpace& space, std::size_t cells);

// [nu^-_0, ..., nu^-_n]: nu^-_n is the gridded Lebesgue measure and
// nu^-_{i-1} = mu_i^- * nu^-_i with mu_i^- the law of f^{-1}.
std::vector<DiscreteMeasure> backward_propagate(
    const MuSequence& seq, std::int64_t n, const PropagationConfig& cfg,
    std::size_t grid = kDefaultLebesgueGrid);

struct Arc {
  double from = 0.0;
  double to = 0.0;  // counterclockwise from `from`
};

struct MartingaleResult {
  double lhs = 0.0;  // E_{mu_i} nu^-_i(f(J))
  double rhs = 0.0;  // nu^-_{i-1}(J)
  double se = 0.0;   // Monte Carlo standard error; 0 for exact enumeration
  bool exact = false;
};

// Checks E_{mu_i} nu^-_i(f(J)) = nu^-_{i-1}(J) for 1 <= i <= n. trials == 0
// enumerates the atoms of mu_i exactly; otherwise f is sampled.
MartingaleResult martingale_check(const MuSequence& seq,
                                  const std::vector<DiscreteMeasure>& inverse,
                                  std::int64_t i, Arc arc, std::uint32_t trials,
                                  std::uint64_t seed);
MartingaleResult martingale_check(const MuSequence& seq, std::int64_t i,
                                  std::int64_t n, Arc arc, std::uint32_t trials,
                                  std::uint64_t seed, const PropagationConfig& cfg,
                                  std::size_t grid = kDefaultLebesgueGrid);

// E over every branch F = f_n o ... o f_i of nu^-_n(F(J)); exhaustive.
double composite_arc_expectation(const MuSequence& seq,
                                 const std::vector<DiscreteMeasure>& inverse,
                                 std::int64_t i, Arc arc);

}  // namespace nsrds
