#include "nsrds/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "nsrds/error.hpp"
#include "nsrds/parallel.hpp"
#include "nsrds/rng.hpp"
#include "nsrds/scenario_io.hpp"
#include "nsrds/simulate.hpp"

namespace nsrds {

using nlohmann::json;

namespace {

constexpr std::uint64_t kProbeTag = 0x70726f6265ull;  // "probe"

class NeumaierSum {
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

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& file, const std::string& body) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorKind::kInput, file.string() + ": cannot write");
  out << body;
}

}  // namespace

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kConfirmsTheorem:
      return "CONFIRMS_THEOREM";
    case Verdict::kExhibitsCounterexample:
      return "EXHIBITS_COUNTEREXAMPLE";
    case Verdict::kInconclusive:
      return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

const Table& ExperimentReport::table(const std::string& table_name) const {
  for (const auto& t : tables) {
    if (t.name == table_name) return t;
  }
  throw Error(ErrorKind::kInternal, "no table named " + table_name);
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir,
                  const std::string& tool_version) {
  std::filesystem::create_directories(dir / "plotdata");
  const std::string hash = content_hash(report.scenario);
  const std::string header = "# " + tool_version + " scenario=" + hash + "\n";

  json tables = json::array();
  for (const auto& t : report.tables) {
    std::string csv = header;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      csv += (c ? "," : "") + t.columns[c];
    }
    csv += "\n";
    for (const auto& row : t.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        csv += (c ? "," : "") + format_double(row[c]);
      }
      csv += "\n";
    }
    write_text(dir / (t.name + ".csv"), csv);

    for (std::size_t c = 1; c < t.columns.size(); ++c) {
      std::string dat = header;
      dat += "# " + t.columns[0] + " " + t.columns[c] + "\n";
      for (const auto& row : t.rows) {
        dat += format_double(row[0]) + " " + format_double(row[c]) + "\n";
      }
      write_text(dir / "plotdata" / (t.name + "_" + t.columns[c] + ".dat"), dat);
    }
    tables.push_back({{"name", t.name}, {"columns", t.columns}, {"file", t.name + ".csv"}});
  }

  const json doc = {{"tool_version", tool_version},
                    {"name", report.name},
                    {"scenario_hash", hash},
                    {"scenario", report.scenario},
                    {"verdict", verdict_name(report.verdict)},
                    {"reason", report.reason},
                    {"notes", report.notes},
                    {"tables", tables}};
  write_text(dir / "report.json", doc.dump(2) + "\n");
}

// Slow diffusion ------------------------------------------------------------

namespace {

json slow_snapshot(const SlowDiffusionParams& p) {
  return {{"experiment", "slow_diffusion"},
          {"kmax", p.kmax},
          {"trials", p.trials},
          {"seed", p.seed},
          {"phi_a", p.phi_a},
          {"phi_b", p.phi_b},
          {"dense", p.dense},
          {"dense_horizon", p.dense_horizon}};
}

}  // namespace

ExperimentReport run_slow_diffusion(const SlowDiffusionParams& params) {
  if (params.kmax < 3) throw Error(ErrorKind::kInput, "kmax must be >= 3");
  if (params.trials < 1) throw Error(ErrorKind::kInput, "trials must be >= 1");

  ExperimentReport report;
  report.name = params.dense ? "slow_diffusion_dense" : "slow_diffusion";
  report.scenario = slow_snapshot(params);
  report.notes.push_back("epoch schedule n_k = 2^(k^2)");
  report.notes.push_back(
      "band thresholds [0,0.2] / [0.8,1] and frequency 0.9 are our own calibration");

  const PhaseSpace space = PhaseSpace::two_point();
  const double span = params.phi_b - params.phi_a;
  if (span == 0.0) {
    report.verdict = Verdict::kInconclusive;
    report.reason = "constant observable";
    report.tables.push_back({"running_average", {"n", "median_average"}, {}});
    return report;
  }
  const auto phi = [&](double x) { return x < 0.5 ? params.phi_a : params.phi_b; };
  const auto normalized = [&](double avg) { return (avg - params.phi_a) / span; };

  if (params.dense) {
    const auto times = sparse_schedule(params.kmax);
    const std::int64_t horizon =
        params.dense_horizon > 0 ? params.dense_horizon : times.back();
    std::vector<std::int64_t> checkpoints;
    for (auto t : times) {
      if (t <= horizon) checkpoints.push_back(t);
    }
    if (checkpoints.empty() || checkpoints.back() != horizon) checkpoints.push_back(horizon);

    const MuSequence seq = MuSequence::two_point_dense();
    std::vector<std::vector<double>> avg(params.trials,
                                         std::vector<double>(checkpoints.size()));
    parallel_for(params.trials, [&](std::size_t t) {
      const TrialStream stream(params.seed, static_cast<std::uint32_t>(t));
      double x = 0.0;
      NeumaierSum sum;
      std::size_t c = 0;
      for (std::int64_t n = 1; n <= horizon; ++n) {
        const MapDistribution& mu = seq.at(n);
        x = apply_map(mu.atoms()[mu.select(stream.uniform(static_cast<std::uint64_t>(n)))],
                      space, x);
        sum.add(phi(x));
        if (n == checkpoints[c]) avg[t][c++] = normalized(sum.value() / n);
      }
    });
    Table tab{"running_average", {"n", "median_average", "q05", "q95"}, {}};
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      std::vector<double> col;
      for (const auto& row : avg) col.push_back(row[c]);
      tab.rows.push_back({static_cast<double>(checkpoints[c]), quantile(col, 0.5),
                          quantile(col, 0.05), quantile(col, 0.95)});
    }
    const double terminal = tab.rows.back()[1];
    report.tables.push_back(std::move(tab));
    if (std::abs(terminal - 0.5) <= kMidpointTolerance) {
      report.verdict = Verdict::kConfirmsTheorem;
      report.reason = "terminal median running average within tolerance of 1/2";
    } else {
      report.verdict = Verdict::kInconclusive;
      report.reason = "terminal median running average not within tolerance of 1/2";
    }
    return report;
  }

  // Sparse schedule: the state is constant between shuffle times, so each
  // epoch contributes (length * phi(state)) in closed form. Swap draws use
  // the same stream positions as simulate_orbit.
  const auto times = sparse_schedule(params.kmax + 1);
  const MuSequence seq = MuSequence::two_point_sparse(sparse_schedule(params.kmax));
  const std::size_t n_obs = times.size();  // observe at n_k - 1, k = 1..kmax+1
  std::vector<std::vector<double>> avg(params.trials, std::vector<double>(n_obs));
  parallel_for(params.trials, [&](std::size_t t) {
    const TrialStream stream(params.seed, static_cast<std::uint32_t>(t));
    double x = 0.0;
    NeumaierSum sum;
    std::int64_t start = 1;  // first step of the current epoch
    for (std::size_t k = 0; k < n_obs; ++k) {
      const std::int64_t end = times[k] - 1;
      sum.add(static_cast<double>(end - start + 1) * phi(x));
      avg[t][k] = normalized(sum.value() / static_cast<double>(end));
      if (k + 1 < n_obs) {
        const std::int64_t n = times[k];
        const MapDistribution& mu = seq.at(n);
        x = apply_map(mu.atoms()[mu.select(stream.uniform(static_cast<std::uint64_t>(n)))],
                      space, x);
        start = n;
      }
    }
  });

  Table tab{"epoch_average",
            {"n", "median_average", "fraction_low", "fraction_high"},
            {}};
  std::size_t in_band = 0;
  std::size_t low = 0;
  std::size_t high = 0;
  std::size_t pooled = 0;
  for (std::size_t k = 0; k < n_obs; ++k) {
    std::vector<double> col;
    std::size_t lo_k = 0;
    std::size_t hi_k = 0;
    for (const auto& row : avg) {
      col.push_back(row[k]);
      lo_k += row[k] <= kLowBand;
      hi_k += row[k] >= kHighBand;
    }
    const double tr = static_cast<double>(params.trials);
    tab.rows.push_back({static_cast<double>(times[k] - 1), quantile(col, 0.5),
                        static_cast<double>(lo_k) / tr, static_cast<double>(hi_k) / tr});
    if (k >= 1) {
      low += lo_k;
      high += hi_k;
      in_band += lo_k + hi_k;
      pooled += params.trials;
    }
  }
  report.tables.push_back(std::move(tab));

  const double frequency = static_cast<double>(in_band) / static_cast<double>(pooled);
  report.notes.push_back("pooled band frequency after the first epoch: " +
                         format_double(frequency));
  if (frequency >= kBandFrequency && low > 0 && high > 0) {
    report.verdict = Verdict::kExhibitsCounterexample;
    report.reason = "running averages accumulate at both phi(a) and phi(b)";
  } else {
    report.verdict = Verdict::kInconclusive;
    report.reason = "band frequency below threshold";
  }
  return report;
}

// Rotation ------------------------------------------------------------------

std::uint64_t to_turns(double x) {
  const double frac = x - std::floor(x);
  const long double scaled = static_cast<long double>(frac) * 18446744073709551616.0L;
  if (scaled >= 18446744073709551616.0L) return 0;
  return static_cast<std::uint64_t>(scaled);
}

double from_turns(std::uint64_t t) {
  return static_cast<double>(static_cast<long double>(t) / 18446744073709551616.0L);
}

ExperimentReport run_rotation_counterexample(const RotationParams& params) {
  if (params.horizon < 1) throw Error(ErrorKind::kInput, "horizon must be >= 1");
  if (params.kmax < 2) throw Error(ErrorKind::kInput, "kmax must be >= 2");

  ExperimentReport report;
  report.name = "rotation";
  report.scenario = {{"experiment", "rotation"},
                     {"alpha", params.alpha},
                     {"phi", to_json(params.phi)},
                     {"x0", params.x0},
                     {"horizon", params.horizon},
                     {"kmax", params.kmax}};
  report.notes.push_back("circle R/Z in 64-bit fixed-point turns");
  report.notes.push_back("epoch schedule n_k = 2^(k^2)");

  const Observable phi(PhaseSpace::interval(0.0, 1.0), params.phi);
  const std::uint64_t a = to_turns(params.alpha);
  const std::uint64_t x0 = to_turns(params.x0);
  const auto value = [&](std::uint64_t t) { return phi(from_turns(t)); };
  const double target = value(x0);

  // phi_k(x_k) = phi(f^{-k}(f^k x0)); the fixed-point inverse is exact.
  Table identity{"identity", {"n", "average", "phi_x0", "abs_error"}, {}};
  NeumaierSum sum;
  std::uint64_t x = x0;
  double max_error = 0.0;
  for (std::int64_t n = 1; n <= params.horizon; ++n) {
    x += a;
    const std::uint64_t back = x - static_cast<std::uint64_t>(n) * a;
    sum.add(value(back));
    const double avg = sum.value() / static_cast<double>(n);
    const double err = std::abs(avg - target);
    max_error = std::max(max_error, err);
    identity.rows.push_back({static_cast<double>(n), avg, target, err});
  }
  report.notes.push_back("max identity error: " + format_double(max_error));

  // Shifted: phi_n(x_n) = phi(f^{r(n)} x0), r(n) = max{k : n > n_k}, n_0 = 1.
  const auto times = sparse_schedule(params.kmax);
  Table shifted{"shifted", {"k", "n_k", "average", "jump"}, {}};
  NeumaierSum ssum;
  std::size_t next = 0;
  int r = 0;
  double prev = std::numeric_limits<double>::quiet_NaN();
  double min_jump = std::numeric_limits<double>::infinity();
  for (std::int64_t n = 1; n <= times.back(); ++n) {
    while (r < params.kmax && n > times[static_cast<std::size_t>(r)]) ++r;
    ssum.add(value(x0 + static_cast<std::uint64_t>(r) * a));
    if (n == times[next]) {
      const double avg = ssum.value() / static_cast<double>(n);
      const double jump = std::isnan(prev) ? std::numeric_limits<double>::quiet_NaN()
                                           : std::abs(avg - prev);
      if (!std::isnan(jump)) min_jump = std::min(min_jump, jump);
      shifted.rows.push_back({static_cast<double>(next + 1), static_cast<double>(n), avg, jump});
      prev = avg;
      ++next;
    }
  }
  report.notes.push_back("min epoch-boundary jump: " + format_double(min_jump));
  report.tables.push_back(std::move(identity));
  report.tables.push_back(std::move(shifted));

  if (phi.is_constant()) {
    report.verdict = Verdict::kInconclusive;
    report.reason = "constant observable";
  } else if (max_error > kRotationIdentityTolerance) {
    report.verdict = Verdict::kInconclusive;
    report.reason = "identity average deviates from phi(x0)";
  } else if (min_jump < kRotationJumpThreshold) {
    report.verdict = Verdict::kInconclusive;
    report.reason = "shifted averages do not jump across epochs";
  } else {
    report.verdict = Verdict::kExhibitsCounterexample;
    report.reason = "time-dependent observables: averages equal phi(x0); shifted variant does not converge";
  }
  return report;
}

// Standing assumption profiler -----------------------------------------------

std::vector<DiscreteMeasure> standing_assumption_probes(const PhaseSpace& space,
                                                        std::uint32_t samples,
                                                        std::uint64_t seed) {
  std::vector<DiscreteMeasure> probes;
  if (space.is_interval()) {
    probes.push_back(DiscreteMeasure::dirac(space, space.lo()));
    probes.push_back(DiscreteMeasure::dirac(space, space.hi()));
  } else if (space.is_projective()) {
    for (int k = 0; k < 8; ++k) probes.push_back(DiscreteMeasure::dirac(space, k * kPi / 8));
  } else {
    for (std::size_t i = 0; i < space.size(); ++i) {
      probes.push_back(DiscreteMeasure::dirac(space, static_cast<double>(i)));
    }
  }
  const std::uint64_t key = derive_seed(seed, kProbeTag);
  for (std::uint32_t s = 0; s < samples; ++s) {
    const TrialStream stream(key, s);
    std::vector<double> support;
    std::vector<double> weights;
    for (std::uint32_t j = 0; j < 4; ++j) {
      const auto [u, w] = stream.uniform2(j);
      double x = 0.0;
      if (space.is_interval()) {
        x = space.lo() + u * (space.hi() - space.lo());
      } else if (space.is_projective()) {
        x = u * kPi;
      } else {
        x = std::floor(u * static_cast<double>(space.size()));
      }
      support.push_back(x);
      weights.push_back(0.05 + w);
    }
    probes.push_back(DiscreteMeasure::normalized(space, std::move(support), std::move(weights)));
  }
  return probes;
}

std::vector<SaProfileRow> profile_standing_assumption(const MuSequence& seq,
                                                      const SaProfileParams& params) {
  if (params.deltas.empty()) throw Error(ErrorKind::kInput, "deltas must be nonempty");
  for (std::size_t i = 0; i < params.deltas.size(); ++i) {
    if (!(params.deltas[i] > 0.0)) throw Error(ErrorKind::kInput, "deltas must be positive");
    if (i && !(params.deltas[i] < params.deltas[i - 1])) {
      throw Error(ErrorKind::kInput, "deltas must be decreasing");
    }
  }
  if (params.n_probes.empty()) throw Error(ErrorKind::kInput, "n_probes must be nonempty");
  for (auto n : params.n_probes) {
    if (n < 0) throw Error(ErrorKind::kInput, "n_probes must be >= 0");
  }
  if (params.m_cap < 0) throw Error(ErrorKind::kInput, "m_cap must be >= 0");
  params.propagation.validate();

  const auto probes = standing_assumption_probes(seq.space(), params.pair_samples, params.seed);
  struct Job {
    std::int64_t n;
    std::size_t i, j;
  };
  std::vector<Job> jobs;
  for (auto n : params.n_probes) {
    for (std::size_t i = 0; i < probes.size(); ++i) {
      for (std::size_t j = i + 1; j < probes.size(); ++j) jobs.push_back({n, i, j});
    }
  }
  const double floor_delta = params.deltas.back();
  const double stop_below = std::nextafter(floor_delta, 0.0);
  std::vector<std::vector<double>> gaps(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t q) {
    const Job& job = jobs[q];
    gaps[q] = standing_assumption_gaps(seq, job.n, params.m_cap, probes[job.i],
                                       probes[job.j], params.propagation, stop_below);
  });

  // worst[m] over all jobs; a stopped series keeps its last value.
  const auto cap = static_cast<std::size_t>(params.m_cap);
  std::vector<double> worst(cap + 1, 0.0);
  for (const auto& g : gaps) {
    for (std::size_t m = 0; m <= cap; ++m) {
      worst[m] = std::max(worst[m], g[std::min(m, g.size() - 1)]);
    }
  }
  std::vector<SaProfileRow> rows;
  for (double delta : params.deltas) {
    SaProfileRow row{delta, std::nullopt, worst[cap]};
    for (std::size_t m = 0; m <= cap; ++m) {
      if (worst[m] < delta) {
        row.m = static_cast<std::int64_t>(m);
        row.worst_gap = worst[m];
        break;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

ExperimentReport standing_assumption_report(const MuSequence& seq,
                                            const json& seq_snapshot,
                                            const SaProfileParams& params) {
  ExperimentReport report;
  report.name = "standing_assumption";
  report.scenario = {{"experiment", "standing_assumption"},
                     {"space", to_json(seq.space())},
                     {"mu_sequence", seq_snapshot},
                     {"deltas", params.deltas},
                     {"n_probes", params.n_probes},
                     {"pair_samples", params.pair_samples},
                     {"seed", params.seed},
                     {"m_cap", params.m_cap},
                     {"propagation", to_json(params.propagation)}};
  report.notes.push_back(
      "sampled surrogate: Dirac probes at extreme points plus seeded random 4-atom measures");

  const auto rows = profile_standing_assumption(seq, params);
  Table tab{"m_delta", {"delta", "m", "worst_gap"}, {}};
  bool all_found = true;
  for (const auto& r : rows) {
    all_found = all_found && r.m.has_value();
    tab.rows.push_back({r.delta,
                        r.m ? static_cast<double>(*r.m)
                            : std::numeric_limits<double>::infinity(),
                        r.worst_gap});
  }
  report.tables.push_back(std::move(tab));
  if (all_found) {
    report.verdict = Verdict::kConfirmsTheorem;
    report.reason = "m(delta) found for every delta";
  } else {
    report.verdict = Verdict::kInconclusive;
    report.reason = "m(delta) not found within m_cap";
  }
  return report;
}

ExperimentReport rerun(const json& snapshot) {
  if (!snapshot.is_object() || !snapshot.contains("experiment")) {
    throw Error(ErrorKind::kInput, "snapshot: missing \"experiment\"");
  }
  const std::string kind = snapshot.at("experiment").get<std::string>();
  if (kind == "slow_diffusion") {
    SlowDiffusionParams p;
    p.kmax = snapshot.at("kmax").get<int>();
    p.trials = snapshot.at("trials").get<std::uint32_t>();
    p.seed = snapshot.at("seed").get<std::uint64_t>();
    p.phi_a = snapshot.at("phi_a").get<double>();
    p.phi_b = snapshot.at("phi_b").get<double>();
    p.dense = snapshot.at("dense").get<bool>();
    p.dense_horizon = snapshot.at("dense_horizon").get<std::int64_t>();
    return run_slow_diffusion(p);
  }
  if (kind == "rotation") {
    RotationParams p;
    p.alpha = snapshot.at("alpha").get<double>();
    const PhaseSpace unit = PhaseSpace::interval(0.0, 1.0);
    p.phi = parse_observable(snapshot.at("phi"), unit, "phi").form();
    p.x0 = snapshot.at("x0").get<double>();
    p.horizon = snapshot.at("horizon").get<std::int64_t>();
    p.kmax = snapshot.at("kmax").get<int>();
    return run_rotation_counterexample(p);
  }
  if (kind == "standing_assumption") {
    const PhaseSpace space = parse_space(snapshot.at("space"));
    const MuSequence seq = parse_mu_sequence(snapshot.at("mu_sequence"), space);
    SaProfileParams p;
    p.deltas = snapshot.at("deltas").get<std::vector<double>>();
    p.n_probes = snapshot.at("n_probes").get<std::vector<std::int64_t>>();
    p.pair_samples = snapshot.at("pair_samples").get<std::uint32_t>();
    p.seed = snapshot.at("seed").get<std::uint64_t>();
    p.m_cap = snapshot.at("m_cap").get<std::int64_t>();
    p.propagation = parse_propagation(snapshot.at("propagation"));
    return standing_assumption_report(seq, snapshot.at("mu_sequence"), p);
  }
  throw Error(ErrorKind::kInput, "snapshot: unknown experiment \"" + kind + "\"");
}

}  // namespace nsrds
