// Shared test helpers: random measures and an independent transport oracle.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "nsrds/measures.hpp"

namespace nsrds::testing {

inline DiscreteMeasure random_measure(const PhaseSpace& space, std::mt19937_64& rng,
                                      int min_atoms, int max_atoms) {
  std::uniform_int_distribution<int> count(min_atoms, max_atoms);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int k = count(rng);
  std::vector<double> support;
  std::vector<double> weights;
  for (int i = 0; i < k; ++i) {
    double x = 0.0;
    if (space.is_interval()) {
      x = space.lo() + u(rng) * (space.hi() - space.lo());
    } else if (space.is_projective()) {
      x = u(rng) * kPi;
    } else {
      x = std::floor(u(rng) * static_cast<double>(space.size()));
    }
    support.push_back(x);
    weights.push_back(0.05 + u(rng));
  }
  return DiscreteMeasure::normalized(space, std::move(support), std::move(weights));
}

// Minimum-cost transport by enumerating every spanning-tree basis of the
// bipartite graph and keeping the cheapest feasible vertex. Exponential;
// intended for 3x3 and smaller.
inline double vertex_enumeration_cost(const std::vector<double>& supply,
                                      const std::vector<double>& demand,
                                      const std::vector<std::vector<double>>& cost) {
  const std::size_t m = supply.size();
  const std::size_t n = demand.size();
  const std::size_t cells = m * n;
  const std::size_t basis = m + n - 1;
  double best = std::numeric_limits<double>::infinity();

  std::vector<int> pick(cells, 0);
  std::fill(pick.end() - static_cast<std::ptrdiff_t>(basis), pick.end(), 1);
  do {
    std::vector<std::size_t> chosen;
    for (std::size_t c = 0; c < cells; ++c) {
      if (pick[c]) chosen.push_back(c);
    }
    // Peel leaves: a row or column node touching one remaining cell fixes
    // that cell's flow.
    std::vector<double> rs(supply);
    std::vector<double> cs(demand);
    std::vector<double> flow(cells, 0.0);
    std::vector<bool> done(chosen.size(), false);
    bool progress = true;
    std::size_t solved = 0;
    while (progress && solved < chosen.size()) {
      progress = false;
      for (std::size_t node = 0; node < m + n && !progress; ++node) {
        std::size_t deg = 0;
        std::size_t last = 0;
        for (std::size_t q = 0; q < chosen.size(); ++q) {
          if (done[q]) continue;
          const std::size_t r = chosen[q] / n;
          const std::size_t col = chosen[q] % n;
          if ((node < m && r == node) || (node >= m && col == node - m)) {
            ++deg;
            last = q;
          }
        }
        if (deg != 1) continue;
        const std::size_t r = chosen[last] / n;
        const std::size_t col = chosen[last] % n;
        const double f = node < m ? rs[r] : cs[col];
        flow[chosen[last]] = f;
        rs[r] -= f;
        cs[col] -= f;
        done[last] = true;
        ++solved;
        progress = true;
      }
    }
    if (solved < chosen.size()) continue;  // contains a cycle
    bool feasible = true;
    for (double v : rs) feasible = feasible && std::abs(v) < 1e-12;
    for (double v : cs) feasible = feasible && std::abs(v) < 1e-12;
    for (double f : flow) feasible = feasible && f > -1e-12;
    if (!feasible) continue;
    double total = 0.0;
    for (std::size_t c = 0; c < cells; ++c) total += flow[c] * cost[c / n][c % n];
    best = std::min(best, total);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

inline double vertex_enumeration_w1(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  std::vector<double> supply(mu.weights().begin(), mu.weights().end());
  std::vector<double> demand(nu.weights().begin(), nu.weights().end());
  std::vector<std::vector<double>> cost(mu.size(), std::vector<double>(nu.size()));
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < nu.size(); ++j) {
      cost[i][j] = mu.space().distance(mu.support()[i], nu.support()[j]);
    }
  }
  return vertex_enumeration_cost(supply, demand, cost);
}

}  // namespace nsrds::testing
