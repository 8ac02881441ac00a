#include "nsrds/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nsrds/error.hpp"
#include "nsrds/parallel.hpp"
#include "nsrds/rng.hpp"

namespace nsrds {

namespace {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double step_map(const MuSequence& seq, const PhaseSpace& space,
                const TrialStream& stream, std::int64_t n, double x) {
  const MapDistribution& mu = seq.at(n);
  const MapAtom& atom =
      mu.size() == 1 ? mu.atoms()[0]
                     : mu.atoms()[mu.select(stream.uniform(static_cast<std::uint64_t>(n)))];
  return space.normalize(apply_map(atom, space, x));
}

}  // namespace

void Scenario::validate() const {
  if (horizon < 1) throw Error(ErrorKind::kInput, "horizon must be >= 1");
  if (trials < 1) throw Error(ErrorKind::kInput, "trials must be >= 1");
  if (!(epsilon > 0.0)) throw Error(ErrorKind::kInput, "epsilon must be > 0");
  if (start_points.empty()) {
    throw Error(ErrorKind::kInput, "start_points must not be empty");
  }
  if (!(seq.space() == space)) {
    throw Error(ErrorKind::kSpaceMismatch,
                "space mismatch: mu sequence acts on " + seq.space().describe());
  }
  if (!(observable.space() == space)) {
    throw Error(ErrorKind::kSpaceMismatch,
                "space mismatch: observable lives on " +
                    observable.space().describe());
  }
  if (nu0 && !(nu0->space() == space)) {
    throw Error(ErrorKind::kSpaceMismatch, "space mismatch: nu0");
  }
  for (double x : start_points) {
    if (!space.contains(x)) {
      throw Error(ErrorKind::kInput,
                  "start point " + std::to_string(x) + " lies outside the space");
    }
  }
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1 || n_grid[i] > horizon ||
        (i > 0 && n_grid[i] <= n_grid[i - 1])) {
      throw Error(ErrorKind::kInput,
                  "n_grid must be strictly increasing within [1, horizon]");
    }
  }
  propagation.validate();
}

double Scenario::start_point(std::uint32_t trial) const {
  return space.normalize(start_points[trial % start_points.size()]);
}

std::vector<std::int64_t> Scenario::grid() const {
  return n_grid.empty() ? default_grid(horizon) : n_grid;
}

std::vector<std::int64_t> default_grid(std::int64_t horizon) {
  std::vector<std::int64_t> out;
  for (std::int64_t n = 64; n <= horizon; n *= 2) out.push_back(n);
  if (out.empty()) out.push_back(horizon);
  return out;
}

std::vector<double> simulate_orbit(const Scenario& sc, double x0,
                                   std::uint32_t trial) {
  if (!sc.space.contains(x0)) {
    throw Error(ErrorKind::kInput, "orbit start lies outside the space");
  }
  const TrialStream stream(sc.seed, trial);
  std::vector<double> orbit;
  orbit.reserve(static_cast<std::size_t>(sc.horizon) + 1);
  orbit.push_back(sc.space.normalize(x0));
  for (std::int64_t n = 1; n <= sc.horizon; ++n) {
    orbit.push_back(step_map(sc.seq, sc.space, stream, n, orbit.back()));
  }
  return orbit;
}

std::vector<double> observable_means(const Observable& phi,
                                     const std::vector<DiscreteMeasure>& nus) {
  std::vector<double> out;
  out.reserve(nus.size());
  for (const auto& nu : nus) out.push_back(nu.integrate(phi));
  return out;
}

std::vector<double> ergodic_deviation(const Observable& phi,
                                      const std::vector<double>& means,
                                      const std::vector<double>& orbit) {
  if (orbit.size() < 2 || means.size() < orbit.size()) {
    throw Error(ErrorKind::kInput,
                "length mismatch: need nu_k for every orbit index");
  }
  std::vector<double> out;
  out.reserve(orbit.size() - 1);
  CompensatedSum path;
  CompensatedSum expected;
  for (std::size_t k = 1; k < orbit.size(); ++k) {
    path.add(phi(orbit[k]));
    expected.add(means[k]);
    out.push_back(std::abs(path.value() - expected.value()) /
                  static_cast<double>(k));
  }
  return out;
}

std::vector<double> ergodic_deviation(const Scenario& sc,
                                      const std::vector<DiscreteMeasure>& nus,
                                      const std::vector<double>& orbit) {
  if (nus.size() != orbit.size()) {
    throw Error(ErrorKind::kInput, "length mismatch between nus and orbit");
  }
  return ergodic_deviation(sc.observable, observable_means(sc.observable, nus),
                           orbit);
}

const std::vector<double>& ExpectedPath::for_start(double x0) const {
  if (start_points.empty()) return means.front();
  for (std::size_t i = 0; i < start_points.size(); ++i) {
    if (start_points[i] == x0) return means[i];
  }
  throw Error(ErrorKind::kInternal, "no propagated measures for start point");
}

ExpectedPath prepare_expected(const Scenario& sc) {
  sc.validate();
  ExpectedPath out;
  auto run = [&](const DiscreteMeasure& nu0) {
    const auto nus = propagate(sc.seq, nu0, sc.horizon, sc.propagation);
    std::size_t biggest = 0;
    for (const auto& nu : nus) biggest = std::max(biggest, nu.size());
    out.means.push_back(observable_means(sc.observable, nus));
    out.max_support.push_back(biggest);
  };
  if (sc.nu0) {
    run(*sc.nu0);
    return out;
  }
  for (std::uint32_t t = 0; t < std::min<std::size_t>(sc.trials, sc.start_points.size()); ++t) {
    const double x0 = sc.start_point(t);
    if (std::find(out.start_points.begin(), out.start_points.end(), x0) !=
        out.start_points.end()) {
      continue;
    }
    out.start_points.push_back(x0);
    run(DiscreteMeasure::dirac(sc.space, x0));
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::kInput, "quantile of nothing");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

DeviationSeries deviation_series(const Scenario& sc, const ExpectedPath& expected,
                                 const std::vector<std::int64_t>& n_grid) {
  sc.validate();
  if (n_grid.empty()) throw Error(ErrorKind::kInput, "empty n_grid");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1 || n_grid[i] > sc.horizon ||
        (i > 0 && n_grid[i] <= n_grid[i - 1])) {
      throw Error(ErrorKind::kInput,
                  "n_grid must be strictly increasing within [1, horizon]");
    }
  }
  DeviationSeries out;
  out.n_grid = n_grid;
  out.epsilon = sc.epsilon;
  out.bound = sc.observable.bound();
  out.per_trial.assign(sc.trials, std::vector<double>(n_grid.size()));
  const std::int64_t last = n_grid.back();

  parallel_for(sc.trials, [&](std::size_t t) {
    const auto trial = static_cast<std::uint32_t>(t);
    const double x0 = sc.start_point(trial);
    const auto& means = expected.for_start(x0);
    const TrialStream stream(sc.seed, trial);
    CompensatedSum path;
    CompensatedSum mean_sum;
    double x = x0;
    std::size_t g = 0;
    auto& row = out.per_trial[t];
    for (std::int64_t n = 1; n <= last; ++n) {
      x = step_map(sc.seq, sc.space, stream, n, x);
      path.add(sc.observable(x));
      mean_sum.add(means[static_cast<std::size_t>(n)]);
      if (n == n_grid[g]) {
        row[g++] = std::abs(path.value() - mean_sum.value()) / static_cast<double>(n);
      }
    }
  });

  const std::size_t gn = n_grid.size();
  out.mean.resize(gn);
  out.q05.resize(gn);
  out.q50.resize(gn);
  out.q95.resize(gn);
  out.exceed_prob.resize(gn);
  out.exceed_count.resize(gn);
  std::vector<double> column(sc.trials);
  for (std::size_t g = 0; g < gn; ++g) {
    CompensatedSum total;
    std::uint32_t exceed = 0;
    for (std::size_t t = 0; t < sc.trials; ++t) {
      column[t] = out.per_trial[t][g];
      total.add(column[t]);
      if (column[t] > sc.epsilon) ++exceed;
    }
    out.mean[g] = total.value() / sc.trials;
    out.q05[g] = quantile(column, 0.05);
    out.q50[g] = quantile(column, 0.50);
    out.q95[g] = quantile(column, 0.95);
    out.exceed_count[g] = exceed;
    out.exceed_prob[g] = static_cast<double>(exceed) / sc.trials;
  }
  return out;
}

DeviationSeries deviation_series(const Scenario& sc) {
  return deviation_series(sc, prepare_expected(sc), sc.grid());
}

std::size_t LdFit::used_points() const {
  return static_cast<std::size_t>(std::count(used.begin(), used.end(), true));
}

bool LdFit::significant_decay() const {
  return std::isfinite(slope) && std::isfinite(slope_se) && slope < 0.0 &&
         std::abs(slope) > 2.0 * slope_se;
}

bool LdFit::no_exceedances_beyond(std::int64_t n_min) const {
  bool any = false;
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    if (n_grid[g] > n_min) {
      any = true;
      if (exceed_count[g] != 0) return false;
    }
  }
  return any;
}

LdFit ld_fit(const DeviationSeries& series, std::uint32_t trials) {
  LdFit fit;
  fit.epsilon = series.epsilon;
  fit.trials = trials;
  fit.n_grid = series.n_grid;
  fit.exceed_count = series.exceed_count;
  fit.exceed_prob = series.exceed_prob;
  const std::size_t gn = series.n_grid.size();
  fit.log_exceed.resize(gn);
  fit.used.resize(gn);
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t g = 0; g < gn; ++g) {
    const double p = series.exceed_prob[g];
    fit.log_exceed[g] = p > 0.0 ? std::log(p) : std::numeric_limits<double>::quiet_NaN();
    fit.used[g] = series.exceed_count[g] >= kMinExceedances;
    if (fit.used[g]) {
      xs.push_back(static_cast<double>(series.n_grid[g]));
      ys.push_back(fit.log_exceed[g]);
    }
  }
  if (xs.empty()) {
    throw Error(ErrorKind::kCensored,
                "no exceedances; increase trials or decrease epsilon");
  }
  const double k = static_cast<double>(xs.size());
  if (xs.size() == 1) {
    fit.slope = std::numeric_limits<double>::quiet_NaN();
    fit.intercept = ys[0];
    fit.slope_se = std::numeric_limits<double>::infinity();
    return fit;
  }
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (xs.size() < 3) {
    fit.slope_se = std::numeric_limits<double>::infinity();
    return fit;
  }
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - fit.intercept - fit.slope * xs[i];
    rss += r * r;
  }
  fit.slope_se = std::sqrt(rss / (k - 2.0) / sxx);
  return fit;
}

LdFit ld_estimate(const Scenario& sc, const ExpectedPath& expected,
                  const std::vector<std::int64_t>& n_grid) {
  if (sc.trials < 100) {
    throw Error(ErrorKind::kInput, "ld_estimate needs at least 100 trials");
  }
  return ld_fit(deviation_series(sc, expected, n_grid), sc.trials);
}

std::optional<std::int64_t> TwoPointProfile::first_reaching(double level) const {
  for (std::size_t m = 0; m < prob.size(); ++m) {
    if (prob[m] >= level) return static_cast<std::int64_t>(m);
  }
  return std::nullopt;
}

TwoPointProfile two_point_profile(const MuSequence& seq, double x, double y,
                                  std::int64_t m, std::uint32_t trials,
                                  std::uint64_t seed, double epsilon) {
  if (m < 0 || trials == 0 || !(epsilon > 0.0)) {
    throw Error(ErrorKind::kInput,
                "two-point contraction needs m >= 0, trials >= 1, epsilon > 0");
  }
  const PhaseSpace& space = seq.space();
  if (!space.contains(x) || !space.contains(y)) {
    throw Error(ErrorKind::kInput, "two-point start lies outside the space");
  }
  std::vector<std::vector<unsigned char>> close(
      trials, std::vector<unsigned char>(static_cast<std::size_t>(m) + 1));
  parallel_for(trials, [&](std::size_t t) {
    const TrialStream stream(seed, static_cast<std::uint32_t>(t));
    double a = space.normalize(x);
    double b = space.normalize(y);
    auto& row = close[t];
    row[0] = space.distance(a, b) < epsilon;
    for (std::int64_t k = 1; k <= m; ++k) {
      const MapDistribution& mu = seq.at(k);
      const MapAtom& atom =
          mu.atoms()[mu.select(stream.uniform(static_cast<std::uint64_t>(k)))];
      a = space.normalize(apply_map(atom, space, a));
      b = space.normalize(apply_map(atom, space, b));
      row[static_cast<std::size_t>(k)] = space.distance(a, b) < epsilon;
    }
  });
  TwoPointProfile out;
  out.epsilon = epsilon;
  out.prob.assign(static_cast<std::size_t>(m) + 1, 0.0);
  for (std::size_t k = 0; k < out.prob.size(); ++k) {
    std::uint32_t hits = 0;
    for (const auto& row : close) hits += row[k];
    out.prob[k] = static_cast<double>(hits) / trials;
  }
  return out;
}

double two_point_contraction(const MuSequence& seq, double x, double y,
                             std::int64_t m, std::uint32_t trials,
                             std::uint64_t seed, double epsilon) {
  return two_point_profile(seq, x, y, m, trials, seed, epsilon).prob.back();
}

}  // namespace nsrds
