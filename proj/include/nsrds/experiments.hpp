#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsrds/models.hpp"
#include "nsrds/observable.hpp"
#include "nsrds/propagation.hpp"

namespace nsrds {

enum class Verdict { kConfirmsTheorem, kExhibitsCounterexample, kInconclusive };

const char* verdict_name(Verdict v);

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ExperimentReport {
  std::string name;
  nlohmann::json scenario;  // everything needed to rerun
  std::vector<Table> tables;
  Verdict verdict = Verdict::kInconclusive;
  std::string reason;       // machine-readable; required when inconclusive
  std::vector<std::string> notes;

  const Table& table(const std::string& table_name) const;
};

// Writes report.json, one CSV per table and plotdata/<table>_<column>.dat
// two-column files (first column against each other column).
void write_report(const ExperimentReport& report, const std::filesystem::path& dir,
                  const std::string& tool_version);

// Re-runs the experiment described by a report's scenario snapshot.
ExperimentReport rerun(const nlohmann::json& snapshot);

// Two-point system {a, b} with swaps at n_k = 2^{k^2}, k = 1..kmax.
struct SlowDiffusionParams {
  int kmax = 3;
  std::uint32_t trials = 500;
  std::uint64_t seed = 0;
  double phi_a = 0.0;
  double phi_b = 1.0;
  // Swap at every step instead (control); simulated step by step up to
  // dense_horizon (0: n_kmax).
  bool dense = false;
  std::int64_t dense_horizon = 0;
};

// Band thresholds for the slow-diffusion verdict, on the normalized
// running average t = (A - phi(a)) / (phi(b) - phi(a)).
inline constexpr double kLowBand = 0.2;
inline constexpr double kHighBand = 0.8;
inline constexpr double kBandFrequency = 0.9;
inline constexpr double kMidpointTolerance = 0.05;

ExperimentReport run_slow_diffusion(const SlowDiffusionParams& params);

// Irrational rotation x -> x + alpha on R/Z, with time-dependent observables
// phi_k = phi o f^{-k} (exact identity) and phi_n = phi o f^{-n + r(n)},
// r(n) = max{k : n > n_k} (shifted variant). Orbits use 64-bit fixed-point
// turns so that f^{-k} o f^k is exact.
struct RotationParams {
  double alpha = 0.6180339887498949;  // (sqrt 5 - 1) / 2
  Observable::Form phi = Observable::CosK{1};
  double x0 = 0.0;
  std::int64_t horizon = 10000;
  int kmax = 4;  // shifted variant runs to n_kmax
};

inline constexpr double kRotationIdentityTolerance = 1e-12;
inline constexpr double kRotationJumpThreshold = 0.1;

ExperimentReport run_rotation_counterexample(const RotationParams& params);

struct SaProfileParams {
  std::vector<double> deltas;          // decreasing
  std::vector<std::int64_t> n_probes;  // initial moments n
  std::uint32_t pair_samples = 8;      // random 4-atom probe measures
  std::uint64_t seed = 0;
  std::int64_t m_cap = 64;
  PropagationConfig propagation;
};

struct SaProfileRow {
  double delta = 0.0;
  std::optional<std::int64_t> m;  // nullopt: not found within m_cap
  double worst_gap = 0.0;         // max gap at m (or at m_cap)
};

// The probe set: Diracs at the interval ends / 8 equispaced angles / every
// label, plus seeded random 4-atom measures.
std::vector<DiscreteMeasure> standing_assumption_probes(const PhaseSpace& space,
                                                        std::uint32_t samples,
                                                        std::uint64_t seed);

// For each delta, the smallest m such that every probed n and probe pair
// has gap < delta after m steps. A pair stops being propagated once its
// gap is below the smallest delta.
std::vector<SaProfileRow> profile_standing_assumption(const MuSequence& seq,
                                                      const SaProfileParams& params);

ExperimentReport standing_assumption_report(const MuSequence& seq,
                                            const nlohmann::json& seq_snapshot,
                                            const SaProfileParams& params);

// Fixed-point circle arithmetic: turns scaled by 2^64.
std::uint64_t to_turns(double x);
double from_turns(std::uint64_t t);

}  // namespace nsrds
