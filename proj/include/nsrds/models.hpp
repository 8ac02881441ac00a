#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nsrds/phase_space.hpp"

namespace nsrds {

// A 2x2 real matrix [[a, b], [c, d]].
struct Mat2 {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
  double d = 1.0;

  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }
  Mat2 inverse() const;  // adjugate / det

  static Mat2 identity() { return {}; }
  static Mat2 rotation(double angle);
  static Mat2 diag(double s) { return {s, 0.0, 0.0, 1.0 / s}; }

  friend Mat2 operator*(const Mat2& x, const Mat2& y);
};

// Throws unless det == 1 within 1e-10.
void require_sl2(const Mat2& m);

// A long product A_n ... A_1 kept as a renormalized matrix (largest entry
// magnitude 1) plus the accumulated log scale, so that the true product is
// exp(log_scale) * matrix.
class ProjectiveProduct {
 public:
  void left_multiply(const Mat2& m);

  const Mat2& matrix() const noexcept { return m_; }
  double log_scale() const noexcept { return log_scale_; }
  // log of the operator norm of the true product.
  double log_norm() const;

 private:
  Mat2 m_{};
  double log_scale_ = 0.0;
};

struct AffineMap {
  double a = 1.0;
  double b = 0.0;
};
struct MoebiusMap {
  Mat2 m{};
};
struct PermutationMap {
  std::vector<std::size_t> table;
};
// Rotation by `alpha` turns: theta -> theta + alpha * pi on the projective
// line, x -> lo + (x - lo + alpha (hi - lo)) mod (hi - lo) on an interval.
struct RotationMap {
  double alpha = 0.0;
};

using Map = std::variant<AffineMap, MoebiusMap, PermutationMap, RotationMap>;

struct MapAtom {
  Map map;
  double prob = 1.0;
};

double apply_map(const Map& f, const PhaseSpace& space, double x);
inline double apply_map(const MapAtom& atom, const PhaseSpace& space, double x) {
  return apply_map(atom.map, space, x);
}
// Throws kNotInvertible for affine maps.
Map invert_map(const Map& f);
bool map_acts_on(const Map& f, const PhaseSpace& space);

// One step's distribution over maps: finitely many (map, probability) atoms
// acting on a common space. Atom order is significant for sampling.
class MapDistribution {
 public:
  MapDistribution(PhaseSpace space, std::vector<MapAtom> atoms);

  static MapDistribution identity(PhaseSpace space);

  const PhaseSpace& space() const noexcept { return space_; }
  const std::vector<MapAtom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }

  // Inverse-CDF selection over atoms in order: the first atom whose
  // cumulative probability exceeds u in [0, 1).
  std::size_t select(double u) const;

  // Largest |a| over affine atoms (1 if there are other map types).
  double lipschitz_bound() const;
  // The law of f^{-1} for f drawn from this distribution.
  MapDistribution inverse() const;

 private:
  PhaseSpace space_;
  std::vector<MapAtom> atoms_;
  std::vector<double> cumulative_;
};

// {x/3 with probability p, x/3 + 2/3 with probability 1 - p} on [0, 1].
MapDistribution cantor_ifs(double p);

// n_k = 2^{k^2} for k = 1..kmax.
std::vector<std::int64_t> sparse_schedule(int kmax);

// The per-step distributions mu_1, mu_2, ... (1-based).
class MuSequence {
 public:
  struct Constant {
    MapDistribution dist;
  };
  struct Periodic {
    std::vector<MapDistribution> dists;
  };
  struct Scripted {
    std::vector<MapDistribution> steps;
    MapDistribution fallback;
  };
  // Two-point space {a, b}: identity except at shuffle times, where the
  // swap is applied with probability `swap_prob`.
  struct TwoPointSparse {
    std::vector<std::int64_t> shuffle_times;
    bool every_step = false;
    double swap_prob = 0.5;
  };
  using Generator = std::variant<Constant, Periodic, Scripted, TwoPointSparse>;

  explicit MuSequence(Generator gen);

  static MuSequence constant(MapDistribution d) {
    return MuSequence(Constant{std::move(d)});
  }
  static MuSequence periodic(std::vector<MapDistribution> ds) {
    return MuSequence(Periodic{std::move(ds)});
  }
  static MuSequence two_point_sparse(std::vector<std::int64_t> times,
                                     double swap_prob = 0.5);
  static MuSequence two_point_dense(double swap_prob = 0.5);

  // mu_n for n >= 1.
  const MapDistribution& at(std::int64_t n) const;
  const PhaseSpace& space() const;
  const Generator& generator() const noexcept { return gen_; }
  bool is_shuffle_time(std::int64_t n) const;

 private:
  Generator gen_;
  // TwoPointSparse materializations.
  std::optional<MapDistribution> still_;
  std::optional<MapDistribution> shuffle_;
};

struct FalsifierVerdict {
  enum class Kind { kPassNecessary, kFail };
  Kind kind = Kind::kPassNecessary;
  // FAIL witness: one angle (Dirac obstruction) or two (pair obstruction).
  std::vector<double> witness;
  std::string reason;

  bool passed() const { return kind == Kind::kPassNecessary; }
};

// Looks for probability measures nu1, nu2 with at most two atoms such that
// (f_A)_* nu1 = nu2 for every atom A. Finding one disproves the measures
// condition; finding none is only a necessary-condition pass.
FalsifierVerdict measures_condition_falsifier(const MapDistribution& dist);

// Real eigen-directions of m as angles in [0, pi). Empty for elliptic or
// scalar matrices.
std::vector<double> eigen_directions(const Mat2& m);

}  // namespace nsrds
