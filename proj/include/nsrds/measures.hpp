#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "nsrds/phase_space.hpp"

namespace nsrds {

// Positions closer than this are treated as one atom when canonicalizing.
inline constexpr double kMergeTolerance = 1e-12;
// Input weights must sum to one within this.
inline constexpr double kMassTolerance = 1e-12;

// A finitely supported Borel probability measure on a PhaseSpace.
//
// Atoms need not be distinct or sorted; canonical() sorts them, merges
// coincident positions and drops zero weights. Instances are immutable.
class DiscreteMeasure {
 public:
  // Validates support membership, nonnegativity and unit mass. Points are
  // snapped into the space (angles reduced mod pi).
  DiscreteMeasure(PhaseSpace space, std::vector<double> support,
                  std::vector<double> weights);

  static DiscreteMeasure dirac(PhaseSpace space, double x);
  static DiscreteMeasure uniform(PhaseSpace space, std::vector<double> points);
  // Rescales weights to sum one before validating; for internal pipelines
  // whose products drift by a few ulps.
  static DiscreteMeasure normalized(PhaseSpace space, std::vector<double> support,
                                    std::vector<double> weights);

  const PhaseSpace& space() const noexcept { return space_; }
  std::span<const double> support() const noexcept { return support_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return support_.size(); }

  DiscreteMeasure canonical() const;
  bool is_canonical() const noexcept { return canonical_; }

  double total_mass() const;
  // Integral of f against the measure.
  template <typename F>
  double integrate(F&& f) const {
    double sum = 0.0;
    double comp = 0.0;  // Neumaier compensation
    for (std::size_t i = 0; i < support_.size(); ++i) {
      const double term = weights_[i] * f(support_[i]);
      const double t = sum + term;
      comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term
                                               : (term - t) + sum;
      sum = t;
    }
    return sum + comp;
  }

  // Mass of the arc running counterclockwise from `from` to `to` on the
  // projective line (closed), or of [from, to] on an interval.
  double arc_mass(double from, double to) const;

 private:
  struct Trusted {};
  DiscreteMeasure(Trusted, PhaseSpace space, std::vector<double> support,
                  std::vector<double> weights, bool canonical);

  PhaseSpace space_;
  std::vector<double> support_;
  std::vector<double> weights_;
  bool canonical_ = false;
};

// Exact W1 on an interval: the integral of |F_mu - F_nu|.
double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Exact W1 on the projective line: min over shifts c of
// integral |F_mu - F_nu - c|, with c a weighted median of the CDF gap.
double wasserstein_circle(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Dispatches on the phase space: closed forms for the interval and the
// projective line, the transportation oracle for finite sets.
double wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

struct TransportPlan {
  DiscreteMeasure row_measure;  // canonical form of the first argument
  DiscreteMeasure col_measure;  // canonical form of the second argument
  std::vector<std::vector<double>> matrix;
  double cost = 0.0;
};

// Cell budget for the exact oracle.
inline constexpr std::size_t kOracleCellCap = 400;

// Optimal plan by the transportation simplex (northwest-corner start,
// Bland's lowest-index pivoting). Works on any phase space.
TransportPlan wasserstein_oracle(const DiscreteMeasure& mu,
                                 const DiscreteMeasure& nu);

// Same solver on a raw transportation problem. Supplies and demands must
// have equal totals; returns the optimal flow matrix.
std::vector<std::vector<double>> solve_transportation(
    std::span<const double> supply, std::span<const double> demand,
    const std::vector<std::vector<double>>& cost);

// Psi_{rho'}(Phi_rho(y, z)): the monotone quantile coupling on the line.
// With (y, z) ~ rho x U[0,1] the output has law rho_prime and the pair
// (y, output) is an optimal W1 coupling.
double quantile_coupling(const DiscreteMeasure& rho,
                         const DiscreteMeasure& rho_prime, double y, double z);

// rho((-inf, y)) + z * rho({y})
double coupling_uniformizer(const DiscreteMeasure& rho, double y, double z);
// sup { y : rho'((-inf, y)) <= s }, clamped to the largest atom.
double coupling_quantile(const DiscreteMeasure& rho_prime, double s);

}  // namespace nsrds
