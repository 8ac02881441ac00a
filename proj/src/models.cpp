#include "nsrds/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nsrds/error.hpp"

namespace nsrds {

namespace {

constexpr double kDetTolerance = 1e-10;
constexpr double kProbTolerance = 1e-12;
constexpr double kAngleTolerance = 1e-9;
constexpr std::size_t kMaxCandidates = 50;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double angle_of(double x, double y) { return wrap_angle(std::atan2(y, x)); }

double projective_distance(double x, double y) {
  const double d = std::abs(x - y);
  return std::min(d, kPi - d);
}

double moebius(const Mat2& m, double theta) {
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  return angle_of(m.a * cs + m.b * sn, m.c * cs + m.d * sn);
}

// m acts as the identity on the projective line (m = s * I).
bool is_scalar(const Mat2& m) {
  const double scale = std::max({std::abs(m.a), std::abs(m.b), std::abs(m.c),
                                 std::abs(m.d)});
  const double tol = 1e-10 * std::max(1.0, scale);
  return std::abs(m.b) <= tol && std::abs(m.c) <= tol &&
         std::abs(m.a - m.d) <= tol;
}

}  // namespace

Mat2 Mat2::inverse() const {
  const double det_m = det();
  if (det_m == 0.0) throw Error(ErrorKind::kNotInvertible, "singular matrix");
  return {d / det_m, -b / det_m, -c / det_m, a / det_m};
}

Mat2 Mat2::rotation(double angle) {
  const double cs = std::cos(angle);
  const double sn = std::sin(angle);
  return {cs, -sn, sn, cs};
}

Mat2 operator*(const Mat2& x, const Mat2& y) {
  return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d,
          x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
}

void require_sl2(const Mat2& m) {
  if (!std::isfinite(m.a) || !std::isfinite(m.b) || !std::isfinite(m.c) ||
      !std::isfinite(m.d) || std::abs(m.det() - 1.0) > kDetTolerance) {
    throw Error(ErrorKind::kInput, "matrix is not in SL(2,R): det = " +
                                       std::to_string(m.det()));
  }
}

void ProjectiveProduct::left_multiply(const Mat2& m) {
  m_ = m * m_;
  const double s = std::max({std::abs(m_.a), std::abs(m_.b), std::abs(m_.c),
                             std::abs(m_.d)});
  m_ = {m_.a / s, m_.b / s, m_.c / s, m_.d / s};
  log_scale_ += std::log(s);
}

double ProjectiveProduct::log_norm() const {
  // Largest singular value of the renormalized matrix.
  const double f2 = m_.a * m_.a + m_.b * m_.b + m_.c * m_.c + m_.d * m_.d;
  const double det_m = m_.det();
  const double disc = std::sqrt(std::max(0.0, f2 * f2 - 4.0 * det_m * det_m));
  return log_scale_ + 0.5 * std::log(0.5 * (f2 + disc));
}

double apply_map(const Map& f, const PhaseSpace& space, double x) {
  return std::visit(
      Overloaded{
          [&](const AffineMap& m) { return m.a * x + m.b; },
          [&](const MoebiusMap& m) { return moebius(m.m, x); },
          [&](const PermutationMap& m) {
            return static_cast<double>(m.table[static_cast<std::size_t>(x)]);
          },
          [&](const RotationMap& m) {
            if (space.is_projective()) return wrap_angle(x + m.alpha * kPi);
            const double len = space.hi() - space.lo();
            double r = std::fmod(x - space.lo() + m.alpha * len, len);
            if (r < 0.0) r += len;
            return space.lo() + r;
          },
      },
      f);
}

Map invert_map(const Map& f) {
  return std::visit(
      Overloaded{
          [](const AffineMap&) -> Map {
            throw Error(ErrorKind::kNotInvertible,
                        "not invertible: affine contraction");
          },
          [](const MoebiusMap& m) -> Map { return MoebiusMap{m.m.inverse()}; },
          [](const PermutationMap& m) -> Map {
            PermutationMap inv{std::vector<std::size_t>(m.table.size())};
            for (std::size_t i = 0; i < m.table.size(); ++i) {
              inv.table[m.table[i]] = i;
            }
            return inv;
          },
          [](const RotationMap& m) -> Map { return RotationMap{-m.alpha}; },
      },
      f);
}

bool map_acts_on(const Map& f, const PhaseSpace& space) {
  return std::visit(
      Overloaded{
          [&](const AffineMap& m) {
            if (!space.is_interval()) return false;
            const double y0 = m.a * space.lo() + m.b;
            const double y1 = m.a * space.hi() + m.b;
            return space.contains(y0) && space.contains(y1);
          },
          [&](const MoebiusMap&) { return space.is_projective(); },
          [&](const PermutationMap& m) {
            if (!space.is_finite() || m.table.size() != space.size()) {
              return false;
            }
            std::vector<bool> hit(m.table.size(), false);
            for (std::size_t v : m.table) {
              if (v >= hit.size() || hit[v]) return false;
              hit[v] = true;
            }
            return true;
          },
          [&](const RotationMap&) {
            return space.is_projective() || space.is_interval();
          },
      },
      f);
}

MapDistribution::MapDistribution(PhaseSpace space, std::vector<MapAtom> atoms)
    : space_(std::move(space)), atoms_(std::move(atoms)) {
  if (atoms_.empty()) {
    throw Error(ErrorKind::kInput, "map distribution needs at least one atom");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    const MapAtom& atom = atoms_[i];
    if (!(atom.prob >= 0.0) || !std::isfinite(atom.prob)) {
      throw Error(ErrorKind::kInput, "atom " + std::to_string(i) +
                                         " has a negative probability");
    }
    if (const auto* mo = std::get_if<MoebiusMap>(&atom.map)) require_sl2(mo->m);
    if (!map_acts_on(atom.map, space_)) {
      throw Error(ErrorKind::kInput, "atom " + std::to_string(i) +
                                         " does not act on " + space_.describe());
    }
    total += atom.prob;
    cumulative_.push_back(total);
  }
  if (std::abs(total - 1.0) > kProbTolerance) {
    throw Error(ErrorKind::kInput, "atom probabilities sum to " +
                                       std::to_string(total) + ", expected 1");
  }
}

MapDistribution MapDistribution::identity(PhaseSpace space) {
  Map id;
  switch (space.kind()) {
    case PhaseSpace::Kind::kInterval:
      id = AffineMap{1.0, 0.0};
      break;
    case PhaseSpace::Kind::kProjectiveLine:
      id = MoebiusMap{Mat2::identity()};
      break;
    case PhaseSpace::Kind::kFiniteSet: {
      PermutationMap p{std::vector<std::size_t>(space.size())};
      std::iota(p.table.begin(), p.table.end(), std::size_t{0});
      id = p;
      break;
    }
  }
  return MapDistribution(std::move(space), {MapAtom{id, 1.0}});
}

std::size_t MapDistribution::select(double u) const {
  for (std::size_t k = 0; k < cumulative_.size(); ++k) {
    if (u < cumulative_[k]) return k;
  }
  for (std::size_t k = atoms_.size(); k-- > 0;) {
    if (atoms_[k].prob > 0.0) return k;
  }
  return atoms_.size() - 1;
}

double MapDistribution::lipschitz_bound() const {
  double lip = 0.0;
  for (const auto& atom : atoms_) {
    if (const auto* af = std::get_if<AffineMap>(&atom.map)) {
      lip = std::max(lip, std::abs(af->a));
    } else {
      return 1.0;
    }
  }
  return lip;
}

MapDistribution MapDistribution::inverse() const {
  std::vector<MapAtom> inv;
  inv.reserve(atoms_.size());
  for (const auto& atom : atoms_) inv.push_back({invert_map(atom.map), atom.prob});
  return MapDistribution(space_, std::move(inv));
}

MapDistribution cantor_ifs(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorKind::kInput, "cantor_ifs: p must lie in [0, 1]");
  }
  return MapDistribution(PhaseSpace::interval(0.0, 1.0),
                         {MapAtom{AffineMap{1.0 / 3.0, 0.0}, p},
                          MapAtom{AffineMap{1.0 / 3.0, 2.0 / 3.0}, 1.0 - p}});
}

std::vector<std::int64_t> sparse_schedule(int kmax) {
  if (kmax < 1 || kmax > 7) {
    throw Error(ErrorKind::kInput, "sparse schedule supports 1 <= kmax <= 7");
  }
  std::vector<std::int64_t> out;
  for (int k = 1; k <= kmax; ++k) out.push_back(std::int64_t{1} << (k * k));
  return out;
}

MuSequence::MuSequence(Generator gen) : gen_(std::move(gen)) {
  std::visit(
      Overloaded{
          [](const Constant&) {},
          [](const Periodic& p) {
            if (p.dists.empty()) {
              throw Error(ErrorKind::kInput, "periodic sequence needs a period");
            }
            for (const auto& d : p.dists) {
              if (!(d.space() == p.dists.front().space())) {
                throw Error(ErrorKind::kSpaceMismatch,
                            "space mismatch inside periodic sequence");
              }
            }
          },
          [](const Scripted& s) {
            for (const auto& d : s.steps) {
              if (!(d.space() == s.fallback.space())) {
                throw Error(ErrorKind::kSpaceMismatch,
                            "space mismatch inside scripted sequence");
              }
            }
          },
          [this](const TwoPointSparse& t) {
            for (std::size_t i = 0; i < t.shuffle_times.size(); ++i) {
              if (t.shuffle_times[i] < 1 ||
                  (i > 0 && t.shuffle_times[i] <= t.shuffle_times[i - 1])) {
                throw Error(ErrorKind::kInput,
                            "shuffle_times must be positive and strictly increasing");
              }
            }
            if (!(t.swap_prob >= 0.0 && t.swap_prob <= 1.0)) {
              throw Error(ErrorKind::kInput, "swap probability must lie in [0, 1]");
            }
            const PhaseSpace two = PhaseSpace::two_point();
            still_.emplace(MapDistribution::identity(two));
            shuffle_.emplace(
                two, std::vector<MapAtom>{
                         MapAtom{PermutationMap{{0, 1}}, 1.0 - t.swap_prob},
                         MapAtom{PermutationMap{{1, 0}}, t.swap_prob}});
          },
      },
      gen_);
}

MuSequence MuSequence::two_point_sparse(std::vector<std::int64_t> times,
                                        double swap_prob) {
  return MuSequence(TwoPointSparse{std::move(times), false, swap_prob});
}

MuSequence MuSequence::two_point_dense(double swap_prob) {
  return MuSequence(TwoPointSparse{{}, true, swap_prob});
}

bool MuSequence::is_shuffle_time(std::int64_t n) const {
  const auto* t = std::get_if<TwoPointSparse>(&gen_);
  if (t == nullptr) return false;
  return t->every_step ||
         std::binary_search(t->shuffle_times.begin(), t->shuffle_times.end(), n);
}

const MapDistribution& MuSequence::at(std::int64_t n) const {
  if (n < 1) throw Error(ErrorKind::kInput, "mu_n is defined for n >= 1");
  return std::visit(
      Overloaded{
          [](const Constant& c) -> const MapDistribution& { return c.dist; },
          [n](const Periodic& p) -> const MapDistribution& {
            return p.dists[static_cast<std::size_t>((n - 1) %
                                                    static_cast<std::int64_t>(
                                                        p.dists.size()))];
          },
          [n](const Scripted& s) -> const MapDistribution& {
            if (n <= static_cast<std::int64_t>(s.steps.size())) {
              return s.steps[static_cast<std::size_t>(n - 1)];
            }
            return s.fallback;
          },
          [this, n](const TwoPointSparse&) -> const MapDistribution& {
            return is_shuffle_time(n) ? *shuffle_ : *still_;
          },
      },
      gen_);
}

const PhaseSpace& MuSequence::space() const { return at(1).space(); }

std::vector<double> eigen_directions(const Mat2& m) {
  if (is_scalar(m)) return {};
  const double tr = m.trace();
  const double disc = tr * tr - 4.0 * m.det();
  if (disc < 0.0) return {};
  const double root = std::sqrt(disc);
  std::vector<double> out;
  for (double lambda : {0.5 * (tr + root), 0.5 * (tr - root)}) {
    // (A - lambda I) v = 0; take the better-conditioned row.
    const double r1 = std::hypot(m.a - lambda, m.b);
    const double r2 = std::hypot(m.c, m.d - lambda);
    double vx;
    double vy;
    if (r1 >= r2) {
      vx = -m.b;
      vy = m.a - lambda;
    } else {
      vx = m.d - lambda;
      vy = -m.c;
    }
    const double th = angle_of(vx, vy);
    bool dup = false;
    for (double o : out) dup = dup || projective_distance(o, th) < kAngleTolerance;
    if (!dup) out.push_back(th);
  }
  return out;
}

FalsifierVerdict measures_condition_falsifier(const MapDistribution& dist) {
  std::vector<Mat2> mats;
  for (const auto& atom : dist.atoms()) {
    const auto* mo = std::get_if<MoebiusMap>(&atom.map);
    if (mo == nullptr) {
      throw Error(ErrorKind::kInput, "falsifier needs Moebius atoms only");
    }
    if (atom.prob > 0.0) mats.push_back(mo->m);
  }
  FalsifierVerdict fail;
  fail.kind = FalsifierVerdict::Kind::kFail;

  // nu2 = (A_j)_* nu1 for all j  <=>  g_j = A_1^{-1} A_j preserves nu1.
  std::vector<Mat2> gs;
  for (std::size_t j = 1; j < mats.size(); ++j) {
    const Mat2 g = mats.front().inverse() * mats[j];
    if (!is_scalar(g)) gs.push_back(g);
  }
  if (gs.empty()) {
    fail.witness = {0.0};
    fail.reason = "all atoms act identically, every measure is carried alike";
    return fail;
  }

  std::vector<double> cand;
  auto add = [&](double th) {
    if (cand.size() >= kMaxCandidates) return;
    for (double o : cand) {
      if (projective_distance(o, th) < kAngleTolerance) return;
    }
    cand.push_back(th);
  };
  auto add_eigen = [&](const Mat2& m) {
    for (double th : eigen_directions(m)) add(th);
  };
  for (const Mat2& m : mats) add_eigen(m);
  for (std::size_t i = 0; i < mats.size(); ++i) {
    for (std::size_t j = 0; j < mats.size(); ++j) {
      if (i != j) add_eigen(mats[i] * mats[j]);
    }
  }
  for (const Mat2& g : gs) {
    add_eigen(g);
    add_eigen(g * g);
  }
  for (std::size_t i = 0; i < gs.size(); ++i) {
    for (std::size_t j = 0; j < gs.size(); ++j) {
      if (i != j) add_eigen(gs[i].inverse() * gs[j]);
    }
  }

  auto fixes = [](const Mat2& g, double th) {
    return projective_distance(moebius(g, th), th) < kAngleTolerance;
  };

  // Dirac obstruction: a direction fixed by every g_j.
  for (double u : cand) {
    if (std::all_of(gs.begin(), gs.end(), [&](const Mat2& g) { return fixes(g, u); })) {
      fail.witness = {u};
      fail.reason = "all atoms send this direction to a common image";
      return fail;
    }
  }

  // Pair obstruction: {u, v} preserved setwise by every g_j. When every g_j
  // is a projective involution any u works, so probe u = 0 as well.
  const bool all_involutions = std::all_of(
      gs.begin(), gs.end(), [](const Mat2& g) { return is_scalar(g * g); });
  if (all_involutions) add(0.0);
  auto preserves = [](const Mat2& g, double u, double v) {
    const double gu = moebius(g, u);
    const double gv = moebius(g, v);
    return (projective_distance(gu, u) < kAngleTolerance &&
            projective_distance(gv, v) < kAngleTolerance) ||
           (projective_distance(gu, v) < kAngleTolerance &&
            projective_distance(gv, u) < kAngleTolerance);
  };
  for (double u : cand) {
    std::vector<double> partners = cand;
    for (const Mat2& g : gs) partners.push_back(moebius(g, u));
    for (double v : partners) {
      if (projective_distance(u, v) < kAngleTolerance) continue;
      if (std::all_of(gs.begin(), gs.end(),
                      [&](const Mat2& g) { return preserves(g, u, v); })) {
        fail.witness = {std::min(u, v), std::max(u, v)};
        fail.reason = "all atoms send this pair to a common pair";
        return fail;
      }
    }
  }

  FalsifierVerdict pass;
  pass.reason = "no invariant configuration with at most two atoms among " +
                std::to_string(cand.size()) + " candidate directions";
  return pass;
}

}  // namespace nsrds
