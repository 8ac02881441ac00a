#include "nsrds/propagation.hpp"

#include <cmath>
#include <string>

#include "nsrds/error.hpp"
#include "nsrds/rng.hpp"

namespace nsrds {

namespace {

constexpr std::uint64_t kResampleTag = 0x7265'7361'6d70'6c65ull;  // "resample"
constexpr std::size_t kRawProductCap = std::size_t{1} << 26;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void overflow(std::size_t atoms, std::size_t cap) {
  throw Error(ErrorKind::kSupportOverflow,
              "support overflow: " + std::to_string(atoms) +
                  " atoms after pruning exceed max_support " +
                  std::to_string(cap));
}

DiscreteMeasure truncate(const DiscreteMeasure& m, double epsilon) {
  std::vector<double> xs;
  std::vector<double> ws;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.weights()[i] >= epsilon) {
      xs.push_back(m.support()[i]);
      ws.push_back(m.weights()[i]);
    }
  }
  if (xs.empty()) {
    throw Error(ErrorKind::kSupportOverflow,
                "support overflow: weight truncation removed every atom");
  }
  return DiscreteMeasure::normalized(m.space(), std::move(xs), std::move(ws)).canonical();
}

// m must be canonical (sorted).
DiscreteMeasure systematic_resample(const DiscreteMeasure& m, std::size_t n,
                                    double offset) {
  std::vector<double> xs;
  xs.reserve(n);
  double cum = m.weights()[0];
  std::size_t atom = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = (static_cast<double>(k) + offset) / static_cast<double>(n);
    while (u >= cum && atom + 1 < m.size()) {
      ++atom;
      cum += m.weights()[atom];
    }
    xs.push_back(m.support()[atom]);
  }
  return DiscreteMeasure::uniform(m.space(), std::move(xs)).canonical();
}

}  // namespace

void PropagationConfig::validate() const {
  if (max_support == 0) throw Error(ErrorKind::kInput, "max_support must be positive");
  std::visit(Overloaded{
                 [](const MergeDuplicates&) {},
                 [](const WeightTruncate& t) {
                   if (!(t.epsilon > 0.0 && t.epsilon <= 1e-6)) {
                     throw Error(ErrorKind::kInput,
                                 "truncation epsilon must lie in (0, 1e-6]");
                   }
                 },
                 [this](const SystematicResample& r) {
                   if (r.n == 0 || r.n > max_support) {
                     throw Error(ErrorKind::kInput,
                                 "resample size must lie in [1, max_support]");
                   }
                 },
             },
             prune);
}

DiscreteMeasure convolve_step(const MapDistribution& mu, const DiscreteMeasure& nu,
                              const PropagationConfig& cfg, std::uint64_t step) {
  if (!(mu.space() == nu.space())) {
    throw Error(ErrorKind::kSpaceMismatch,
                "space mismatch: maps act on " + mu.space().describe() +
                    ", measure lives on " + nu.space().describe());
  }
  const std::size_t raw = mu.size() * nu.size();
  if (raw > kRawProductCap) overflow(raw, cfg.max_support);
  std::vector<double> xs;
  std::vector<double> ws;
  xs.reserve(raw);
  ws.reserve(raw);
  const PhaseSpace& space = nu.space();
  for (const MapAtom& atom : mu.atoms()) {
    if (atom.prob == 0.0) continue;
    for (std::size_t j = 0; j < nu.size(); ++j) {
      xs.push_back(space.normalize(apply_map(atom, space, nu.support()[j])));
      ws.push_back(atom.prob * nu.weights()[j]);
    }
  }
  DiscreteMeasure out =
      DiscreteMeasure::normalized(space, std::move(xs), std::move(ws)).canonical();
  out = std::visit(
      Overloaded{
          [&](const PropagationConfig::MergeDuplicates&) { return out; },
          [&](const PropagationConfig::WeightTruncate& t) {
            return truncate(out, t.epsilon);
          },
          [&](const PropagationConfig::SystematicResample& r) {
            if (out.size() <= r.n) return out;
            const TrialStream stream(derive_seed(cfg.resample_seed, kResampleTag), 0);
            return systematic_resample(out, r.n, stream.uniform(step));
          },
      },
      cfg.prune);
  if (out.size() > cfg.max_support) overflow(out.size(), cfg.max_support);
  return out;
}

std::vector<DiscreteMeasure> propagate(const MuSequence& seq,
                                       const DiscreteMeasure& nu0, std::int64_t n,
                                       const PropagationConfig& cfg) {
  if (n < 0) throw Error(ErrorKind::kInput, "propagate needs n >= 0");
  cfg.validate();
  std::vector<DiscreteMeasure> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  out.push_back(nu0);
  for (std::int64_t k = 1; k <= n; ++k) {
    out.push_back(convolve_step(seq.at(k), out.back(), cfg,
                                static_cast<std::uint64_t>(k)));
  }
  return out;
}

std::vector<double> standing_assumption_gaps(const MuSequence& seq,
                                             std::int64_t n, std::int64_t m_max,
                                             const DiscreteMeasure& nu,
                                             const DiscreteMeasure& nu_prime,
                                             const PropagationConfig& cfg,
                                             double stop_below) {
  if (n < 0 || m_max < 0) {
    throw Error(ErrorKind::kInput, "standing assumption gap needs n, m >= 0");
  }
  if (!(nu.space() == nu_prime.space())) {
    throw Error(ErrorKind::kSpaceMismatch, "space mismatch between nu and nu'");
  }
  cfg.validate();
  std::vector<double> gaps;
  DiscreteMeasure a = nu;
  DiscreteMeasure b = nu_prime;
  gaps.push_back(wasserstein(a, b));
  for (std::int64_t k = 1; k <= m_max && gaps.back() > stop_below; ++k) {
    const auto& mu = seq.at(n + k);
    const auto step = static_cast<std::uint64_t>(n + k);
    a = convolve_step(mu, a, cfg, step);
    b = convolve_step(mu, b, cfg, step);
    gaps.push_back(wasserstein(a, b));
  }
  return gaps;
}

double standing_assumption_gap(const MuSequence& seq, std::int64_t n,
                               std::int64_t m, const DiscreteMeasure& nu,
                               const DiscreteMeasure& nu_prime,
                               const PropagationConfig& cfg) {
  return standing_assumption_gaps(seq, n, m, nu, nu_prime, cfg).back();
}

DiscreteMeasure lebesgue_grid(const PhaseSpace& space, std::size_t cells) {
  if (cells == 0) throw Error(ErrorKind::kInput, "grid needs at least one cell");
  if (space.is_finite()) {
    std::vector<double> pts(space.size());
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = static_cast<double>(i);
    return DiscreteMeasure::uniform(space, std::move(pts));
  }
  const double width = (space.hi() - space.lo()) / static_cast<double>(cells);
  std::vector<double> pts(cells);
  for (std::size_t j = 0; j < cells; ++j) {
    pts[j] = space.lo() + (static_cast<double>(j) + 0.5) * width;
  }
  return DiscreteMeasure::uniform(space, std::move(pts)).canonical();
}

std::vector<DiscreteMeasure> backward_propagate(const MuSequence& seq,
                                                std::int64_t n,
                                                const PropagationConfig& cfg,
                                                std::size_t grid) {
  if (n < 0) throw Error(ErrorKind::kInput, "backward_propagate needs n >= 0");
  cfg.validate();
  std::vector<DiscreteMeasure> rev;
  rev.reserve(static_cast<std::size_t>(n) + 1);
  rev.push_back(lebesgue_grid(seq.space(), grid));
  for (std::int64_t i = n; i >= 1; --i) {
    rev.push_back(convolve_step(seq.at(i).inverse(), rev.back(), cfg,
                                static_cast<std::uint64_t>(i)));
  }
  return {rev.rbegin(), rev.rend()};
}

namespace {

void require_arcs(const MuSequence& seq) {
  if (!seq.space().is_projective()) {
    throw Error(ErrorKind::kSpaceMismatch,
                "space mismatch: martingale check runs on the projective line");
  }
}

double image_arc_mass(const DiscreteMeasure& m, const Map& f, Arc arc) {
  const PhaseSpace& s = m.space();
  return m.arc_mass(apply_map(f, s, arc.from), apply_map(f, s, arc.to));
}

}  // namespace

MartingaleResult martingale_check(const MuSequence& seq,
                                  const std::vector<DiscreteMeasure>& inverse,
                                  std::int64_t i, Arc arc, std::uint32_t trials,
                                  std::uint64_t seed) {
  require_arcs(seq);
  const auto n = static_cast<std::int64_t>(inverse.size()) - 1;
  if (i < 1 || i > n) {
    throw Error(ErrorKind::kInput, "martingale check needs 1 <= i <= n");
  }
  const DiscreteMeasure& target = inverse[static_cast<std::size_t>(i)];
  const MapDistribution& mu = seq.at(i);
  MartingaleResult r;
  r.rhs = inverse[static_cast<std::size_t>(i - 1)].arc_mass(arc.from, arc.to);
  if (trials == 0) {
    for (const MapAtom& atom : mu.atoms()) {
      r.lhs += atom.prob * image_arc_mass(target, atom.map, arc);
    }
    r.exact = true;
    return r;
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::uint32_t t = 0; t < trials; ++t) {
    const TrialStream stream(seed, t);
    const MapAtom& atom = mu.atoms()[mu.select(stream.uniform(static_cast<std::uint64_t>(i)))];
    const double v = image_arc_mass(target, atom.map, arc);
    sum += v;
    sum_sq += v * v;
  }
  const double nt = static_cast<double>(trials);
  r.lhs = sum / nt;
  const double var = trials > 1 ? std::max(0.0, (sum_sq - nt * r.lhs * r.lhs) / (nt - 1.0)) : 0.0;
  r.se = std::sqrt(var / nt);
  return r;
}

MartingaleResult martingale_check(const MuSequence& seq, std::int64_t i,
                                  std::int64_t n, Arc arc, std::uint32_t trials,
                                  std::uint64_t seed, const PropagationConfig& cfg,
                                  std::size_t grid) {
  require_arcs(seq);
  if (i < 1 || i > n) {
    throw Error(ErrorKind::kInput, "martingale check needs 1 <= i <= n");
  }
  return martingale_check(seq, backward_propagate(seq, n, cfg, grid), i, arc,
                          trials, seed);
}

double composite_arc_expectation(const MuSequence& seq,
                                 const std::vector<DiscreteMeasure>& inverse,
                                 std::int64_t i, Arc arc) {
  require_arcs(seq);
  const auto n = static_cast<std::int64_t>(inverse.size()) - 1;
  if (i < 1 || i > n) {
    throw Error(ErrorKind::kInput, "composite expectation needs 1 <= i <= n");
  }
  const PhaseSpace& s = seq.space();
  const DiscreteMeasure& terminal = inverse.back();
  // Depth-first over branches; endpoints of F(J) carried along.
  auto recurse = [&](auto&& self, std::int64_t k, double from, double to,
                     double weight) -> double {
    if (k > n) return weight * terminal.arc_mass(from, to);
    double acc = 0.0;
    for (const MapAtom& atom : seq.at(k).atoms()) {
      if (atom.prob == 0.0) continue;
      acc += self(self, k + 1, apply_map(atom, s, from), apply_map(atom, s, to),
                  weight * atom.prob);
    }
    return acc;
  };
  return recurse(recurse, i, arc.from, arc.to, 1.0);
}

}  // namespace nsrds
