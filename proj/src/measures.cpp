#include "nsrds/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>
#include <utility>

#include "nsrds/error.hpp"

namespace nsrds {

namespace {

void require_same_space(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (!(mu.space() == nu.space())) {
    throw Error(ErrorKind::kSpaceMismatch,
                "space mismatch: " + mu.space().describe() + " vs " +
                    nu.space().describe());
  }
}

struct Event {
  double x;
  double dw;  // +w for the first measure, -w for the second
};

// Atoms of mu (positive) and nu (negative) sorted by position.
std::vector<Event> signed_events(const DiscreteMeasure& mu,
                                 const DiscreteMeasure& nu) {
  std::vector<Event> ev;
  ev.reserve(mu.size() + nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    ev.push_back({mu.support()[i], mu.weights()[i]});
  }
  for (std::size_t i = 0; i < nu.size(); ++i) {
    ev.push_back({nu.support()[i], -nu.weights()[i]});
  }
  std::stable_sort(ev.begin(), ev.end(),
                   [](const Event& a, const Event& b) { return a.x < b.x; });
  return ev;
}

// A fixed order on measures; solvers run on ordered arguments so that
// W(mu, nu) and W(nu, mu) agree bitwise.
bool precedes(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  const auto as = a.support();
  const auto bs = b.support();
  if (std::lexicographical_compare(as.begin(), as.end(), bs.begin(), bs.end())) return true;
  if (std::lexicographical_compare(bs.begin(), bs.end(), as.begin(), as.end())) return false;
  const auto aw = a.weights();
  const auto bw = b.weights();
  return std::lexicographical_compare(aw.begin(), aw.end(), bw.begin(), bw.end());
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(PhaseSpace space, std::vector<double> support,
                                 std::vector<double> weights)
    : space_(std::move(space)),
      support_(std::move(support)),
      weights_(std::move(weights)) {
  if (support_.size() != weights_.size()) {
    throw Error(ErrorKind::kInput, "support and weights differ in length");
  }
  if (support_.empty()) {
    throw Error(ErrorKind::kInput, "measure needs at least one atom");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < support_.size(); ++i) {
    if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
      throw Error(ErrorKind::kInput, "weights must be nonnegative");
    }
    if (!space_.contains(support_[i])) {
      throw Error(ErrorKind::kInput, "support point " +
                                         std::to_string(support_[i]) +
                                         " lies outside " + space_.describe());
    }
    support_[i] = space_.normalize(support_[i]);
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    throw Error(ErrorKind::kInput,
                "weights sum to " + std::to_string(total) + ", expected 1");
  }
}

DiscreteMeasure::DiscreteMeasure(Trusted, PhaseSpace space,
                                 std::vector<double> support,
                                 std::vector<double> weights, bool canonical)
    : space_(std::move(space)),
      support_(std::move(support)),
      weights_(std::move(weights)),
      canonical_(canonical) {}

DiscreteMeasure DiscreteMeasure::dirac(PhaseSpace space, double x) {
  return DiscreteMeasure(std::move(space), {x}, {1.0});
}

DiscreteMeasure DiscreteMeasure::uniform(PhaseSpace space,
                                         std::vector<double> points) {
  const std::size_t n = points.size();
  if (n == 0) throw Error(ErrorKind::kInput, "uniform measure needs points");
  return normalized(std::move(space), std::move(points),
                    std::vector<double>(n, 1.0));
}

DiscreteMeasure DiscreteMeasure::normalized(PhaseSpace space,
                                            std::vector<double> support,
                                            std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) {
    throw Error(ErrorKind::kInput, "measure has no mass to normalize");
  }
  for (double& w : weights) w /= total;
  return DiscreteMeasure(std::move(space), std::move(support),
                         std::move(weights));
}

DiscreteMeasure DiscreteMeasure::canonical() const {
  if (canonical_) return *this;
  std::vector<std::size_t> order(support_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return support_[a] < support_[b];
  });
  std::vector<double> xs;
  std::vector<double> ws;
  xs.reserve(order.size());
  ws.reserve(order.size());
  for (std::size_t idx : order) {
    const double x = support_[idx];
    const double w = weights_[idx];
    if (!xs.empty() && x - xs.back() <= kMergeTolerance) {
      ws.back() += w;
    } else {
      xs.push_back(x);
      ws.push_back(w);
    }
  }
  if (space_.is_projective() && xs.size() > 1 &&
      kPi - xs.back() + xs.front() <= kMergeTolerance) {
    ws.front() += ws.back();
    xs.pop_back();
    ws.pop_back();
  }
  std::size_t keep = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (ws[i] > 0.0) {
      xs[keep] = xs[i];
      ws[keep] = ws[i];
      ++keep;
    }
  }
  xs.resize(keep);
  ws.resize(keep);
  return DiscreteMeasure(Trusted{}, space_, std::move(xs), std::move(ws), true);
}

double DiscreteMeasure::total_mass() const {
  return integrate([](double) { return 1.0; });
}

double DiscreteMeasure::arc_mass(double from, double to) const {
  double mass = 0.0;
  if (space_.is_projective()) {
    const double len = wrap_angle(to - from);
    for (std::size_t i = 0; i < support_.size(); ++i) {
      if (wrap_angle(support_[i] - from) <= len) mass += weights_[i];
    }
  } else {
    for (std::size_t i = 0; i < support_.size(); ++i) {
      if (support_[i] >= from && support_[i] <= to) mass += weights_[i];
    }
  }
  return mass;
}

double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_same_space(mu, nu);
  if (!mu.space().is_interval()) {
    throw Error(ErrorKind::kSpaceMismatch,
                "space mismatch: wasserstein_1d needs an interval");
  }
  if (precedes(nu, mu)) return wasserstein_1d(nu, mu);
  const auto ev = signed_events(mu, nu);
  double diff = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < ev.size(); ++k) {
    diff += ev[k].dw;
    total += std::abs(diff) * (ev[k + 1].x - ev[k].x);
  }
  return total;
}

double wasserstein_circle(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_same_space(mu, nu);
  if (!mu.space().is_projective()) {
    throw Error(ErrorKind::kSpaceMismatch,
                "space mismatch: wasserstein_circle needs the projective line");
  }
  if (precedes(nu, mu)) return wasserstein_circle(nu, mu);
  const auto ev = signed_events(mu, nu);
  // Piecewise-constant CDF gap g on [0, pi): (segment length, g).
  std::vector<std::pair<double, double>> seg;
  seg.reserve(ev.size() + 1);
  seg.emplace_back(ev.front().x, 0.0);
  double diff = 0.0;
  for (std::size_t k = 0; k < ev.size(); ++k) {
    diff += ev[k].dw;
    const double next = k + 1 < ev.size() ? ev[k + 1].x : kPi;
    seg.emplace_back(next - ev[k].x, diff);
  }
  // Weighted median of g; exact half-mass ties resolve to the smaller value.
  auto by_gap = seg;
  std::stable_sort(by_gap.begin(), by_gap.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  const double half = kPi / 2.0;
  double acc = 0.0;
  double shift = by_gap.back().second;
  for (const auto& [len, g] : by_gap) {
    acc += len;
    if (acc >= half) {
      shift = g;
      break;
    }
  }
  double total = 0.0;
  for (const auto& [len, g] : seg) total += len * std::abs(g - shift);
  return total;
}

double wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_same_space(mu, nu);
  switch (mu.space().kind()) {
    case PhaseSpace::Kind::kInterval:
      return wasserstein_1d(mu, nu);
    case PhaseSpace::Kind::kProjectiveLine:
      return wasserstein_circle(mu, nu);
    case PhaseSpace::Kind::kFiniteSet:
      return wasserstein_oracle(mu, nu).cost;
  }
  return 0.0;
}

std::vector<std::vector<double>> solve_transportation(
    std::span<const double> supply, std::span<const double> demand,
    const std::vector<std::vector<double>>& cost) {
  const std::size_t m = supply.size();
  const std::size_t n = demand.size();
  if (m == 0 || n == 0) {
    throw Error(ErrorKind::kInput, "transportation problem is empty");
  }
  constexpr double kReducedCostTol = 1e-12;
  std::vector<std::vector<double>> flow(m, std::vector<double>(n, 0.0));
  std::vector<std::vector<bool>> basic(m, std::vector<bool>(n, false));

  // Northwest corner: exactly m + n - 1 basic cells forming a spanning tree.
  {
    std::vector<double> a(supply.begin(), supply.end());
    std::vector<double> b(demand.begin(), demand.end());
    std::size_t i = 0;
    std::size_t j = 0;
    while (true) {
      const double x = std::max(0.0, std::min(a[i], b[j]));
      flow[i][j] = x;
      basic[i][j] = true;
      a[i] -= x;
      b[j] -= x;
      if (i == m - 1 && j == n - 1) break;
      if (i < m - 1 && (j == n - 1 || a[i] <= b[j])) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  const std::size_t nodes = m + n;
  std::vector<double> pot(nodes);
  std::vector<bool> seen(nodes);
  std::vector<std::pair<std::size_t, std::size_t>> parent(nodes);
  std::vector<std::vector<std::size_t>> adj(nodes);

  const std::size_t max_pivots = 50 * (m + n) * (m + n) + 1000;
  for (std::size_t pivot = 0;; ++pivot) {
    if (pivot > max_pivots) {
      throw Error(ErrorKind::kInternal, "transportation simplex did not converge");
    }
    for (auto& a : adj) a.clear();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (basic[i][j]) {
          adj[i].push_back(m + j);
          adj[m + j].push_back(i);
        }
      }
    }
    // Potentials u_i + v_j = c_ij on the tree, rooted at row 0.
    std::fill(seen.begin(), seen.end(), false);
    std::queue<std::size_t> q;
    pot[0] = 0.0;
    seen[0] = true;
    q.push(0);
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t v : adj[u]) {
        if (seen[v]) continue;
        seen[v] = true;
        const double c = u < m ? cost[u][v - m] : cost[v][u - m];
        pot[v] = c - pot[u];
        q.push(v);
      }
    }

    // Entering cell: lowest index with negative reduced cost.
    std::size_t ei = m;
    std::size_t ej = n;
    for (std::size_t i = 0; i < m && ei == m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (basic[i][j]) continue;
        if (cost[i][j] - pot[i] - pot[m + j] < -kReducedCostTol) {
          ei = i;
          ej = j;
          break;
        }
      }
    }
    if (ei == m) break;

    // Tree path from row ei to column ej.
    std::fill(seen.begin(), seen.end(), false);
    seen[ei] = true;
    q.push(ei);
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t v : adj[u]) {
        if (seen[v]) continue;
        seen[v] = true;
        parent[v] = u < m ? std::pair{u, v - m} : std::pair{v, u - m};
        q.push(v);
      }
    }
    std::vector<std::pair<std::size_t, std::size_t>> path;  // from col ej back
    for (std::size_t node = m + ej; node != ei;) {
      const auto cell = parent[node];
      path.push_back(cell);
      node = node < m ? m + cell.second : cell.first;
    }
    // Cells at even positions of `path` lose flow, odd positions gain.
    double theta = 0.0;
    std::size_t leave = path.size();
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const auto [i, j] = path[k];
      const double f = flow[i][j];
      const bool better =
          leave == path.size() || f < theta ||
          (f == theta && i * n + j < path[leave].first * n + path[leave].second);
      if (better) {
        theta = f;
        leave = k;
      }
    }
    flow[ei][ej] = theta;
    basic[ei][ej] = true;
    for (std::size_t k = 0; k < path.size(); ++k) {
      const auto [i, j] = path[k];
      flow[i][j] = k % 2 == 0 ? std::max(0.0, flow[i][j] - theta)
                              : flow[i][j] + theta;
    }
    const auto [li, lj] = path[leave];
    flow[li][lj] = 0.0;
    basic[li][lj] = false;
  }
  return flow;
}

TransportPlan wasserstein_oracle(const DiscreteMeasure& mu,
                                 const DiscreteMeasure& nu) {
  require_same_space(mu, nu);
  DiscreteMeasure a = mu.canonical();
  DiscreteMeasure b = nu.canonical();
  if (a.size() * b.size() > kOracleCellCap) {
    throw Error(ErrorKind::kOracleSizeCap,
                "oracle size cap: " + std::to_string(a.size()) + " x " +
                    std::to_string(b.size()) + " exceeds " +
                    std::to_string(kOracleCellCap) + " cells");
  }
  const bool swapped = precedes(b, a);
  const DiscreteMeasure& r = swapped ? b : a;
  const DiscreteMeasure& c = swapped ? a : b;
  const PhaseSpace& space = a.space();
  std::vector<std::vector<double>> cost(r.size(), std::vector<double>(c.size()));
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      cost[i][j] = space.distance(r.support()[i], c.support()[j]);
    }
  }
  auto flow = solve_transportation(r.weights(), c.weights(), cost);
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) total += flow[i][j] * cost[i][j];
  }
  if (swapped) {
    std::vector<std::vector<double>> t(a.size(), std::vector<double>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) t[i][j] = flow[j][i];
    }
    flow = std::move(t);
  }
  return TransportPlan{std::move(a), std::move(b), std::move(flow), total};
}

double coupling_uniformizer(const DiscreteMeasure& rho, double y, double z) {
  double below = 0.0;
  double at = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double x = rho.support()[i];
    if (std::abs(x - y) <= kMergeTolerance) {
      at += rho.weights()[i];
    } else if (x < y) {
      below += rho.weights()[i];
    }
  }
  return below + z * at;
}

double coupling_quantile(const DiscreteMeasure& rho_prime, double s) {
  const DiscreteMeasure c = rho_prime.canonical();
  // below[k] = rho'((-inf, x_k)), nondecreasing.
  std::vector<double> below(c.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    below[k] = acc;
    acc += c.weights()[k];
  }
  const auto it = std::upper_bound(below.begin(), below.end(), s);
  const std::size_t k = it == below.begin()
                            ? 0
                            : static_cast<std::size_t>(it - below.begin()) - 1;
  return c.support()[k];
}

double quantile_coupling(const DiscreteMeasure& rho,
                         const DiscreteMeasure& rho_prime, double y, double z) {
  if (!(z >= 0.0 && z <= 1.0)) {
    throw Error(ErrorKind::kInput, "coupling auxiliary z must lie in [0, 1]");
  }
  if (!rho.space().is_interval() || !rho_prime.space().is_interval()) {
    throw Error(ErrorKind::kSpaceMismatch,
                "space mismatch: quantile coupling needs interval measures");
  }
  return coupling_quantile(rho_prime, coupling_uniformizer(rho, y, z));
}

}  // namespace nsrds
