#include "nsrds/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>

#include "nsrds/error.hpp"
#include "nsrds/experiments.hpp"
#include "nsrds/parallel.hpp"
#include "nsrds/propagation.hpp"
#include "nsrds/scenario_io.hpp"
#include "nsrds/simulate.hpp"

namespace nsrds {

using nlohmann::json;

namespace {

// Exceedance-free tail beyond this n counts as conclusive LD evidence.
constexpr std::int64_t kLdTailStart = 256;

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool strict = false;
  std::string out_dir = ".";
};

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(fmt(v)); }

std::string artifact_header(const std::string& hash) {
  return std::string("# ") + kToolVersion + " scenario=" + hash + "\n";
}

void write_file(const std::filesystem::path& file, const std::string& body) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorKind::kInput, file.string() + ": cannot write");
  out << body;
}

void apply_threads(const Common& c) {
  if (c.threads) {
    set_thread_limit(*c.threads);
    return;
  }
  if (const char* env = std::getenv("NONSTAT_RDS_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0') {
      throw Error(ErrorKind::kInput, "NONSTAT_RDS_THREADS: expected a nonnegative integer");
    }
    set_thread_limit(static_cast<unsigned>(v));
  }
}

// The flag wins over the file; neither is an error.
std::uint64_t resolve_seed(const json& doc, const Common& c) {
  if (c.seed) return *c.seed;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) {
      throw Error(ErrorKind::kInput, "seed: expected a nonnegative integer");
    }
    return doc["seed"].get<std::uint64_t>();
  }
  throw Error(ErrorKind::kInput,
              "seed: missing; set \"seed\" in the input file or pass --seed");
}

void check_version(const json& doc, const std::string& what) {
  if (!doc.is_object()) throw Error(ErrorKind::kInput, what + ": expected an object");
  if (!doc.contains("version") || doc["version"] != kScenarioVersion) {
    throw Error(ErrorKind::kInput, "version: expected \"" + std::string(kScenarioVersion) +
                                       "\" in " + what);
  }
}

void allow_only(const json& doc, std::initializer_list<const char*> keys) {
  for (const auto& [k, v] : doc.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* a) { return k == a; }) ==
        keys.end()) {
      throw Error(ErrorKind::kInput, k + ": unknown key");
    }
  }
}

const json& need(const json& doc, const char* key) {
  if (!doc.contains(key)) {
    throw Error(ErrorKind::kInput, std::string(key) + ": missing required field");
  }
  return doc[key];
}

template <typename T>
T get_as(const json& doc, const char* key) {
  try {
    return need(doc, key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::kInput, std::string(key) + ": wrong type");
  }
}

Scenario load_with_seed(const std::string& path, const Common& c) {
  json doc = read_json_file(path);
  const std::uint64_t seed = resolve_seed(doc, c);
  doc["seed"] = seed;
  return parse_scenario(doc);
}

json ld_json(const DeviationSeries& series, std::uint32_t trials, bool& conclusive) {
  json j;
  j["epsilon"] = series.epsilon;
  j["trials"] = trials;
  j["n_grid"] = series.n_grid;
  j["exceed_count"] = series.exceed_count;
  j["exceed_prob"] = series.exceed_prob;
  bool tail_clear = false;
  {
    bool any = false;
    tail_clear = true;
    for (std::size_t g = 0; g < series.n_grid.size(); ++g) {
      if (series.n_grid[g] > kLdTailStart) {
        any = true;
        tail_clear = tail_clear && series.exceed_count[g] == 0;
      }
    }
    tail_clear = tail_clear && any;
  }
  j["no_exceedances_beyond_256"] = tail_clear;
  try {
    const LdFit fit = ld_fit(series, trials);
    json logs = json::array();
    for (double v : fit.log_exceed) logs.push_back(finite_or_null(v));
    j["status"] = "fit";
    j["log_exceed"] = logs;
    j["used"] = fit.used;
    j["slope"] = finite_or_null(fit.slope);
    j["intercept"] = finite_or_null(fit.intercept);
    j["slope_se"] = finite_or_null(fit.slope_se);
    j["significant_decay"] = fit.significant_decay();
    conclusive = fit.significant_decay() || tail_clear;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kCensored) throw;
    j["status"] = "censored";
    j["reason"] = e.what();
    conclusive = tail_clear;
  }
  j["verdict"] = conclusive ? "decay" : "inconclusive";
  return j;
}

void write_json(const std::filesystem::path& file, json body, const std::string& hash) {
  body["tool_version"] = kToolVersion;
  body["scenario_hash"] = hash;
  write_file(file, body.dump(2) + "\n");
}

int finish(bool conclusive, const Common& c, std::ostream& err, const std::string& what) {
  if (!conclusive && c.strict) {
    err << "inconclusive: " << what << "\n";
    return kExitInconclusive;
  }
  return kExitOk;
}

int cmd_simulate(const std::string& path, const Common& c, bool ld_only,
                 std::ostream& out, std::ostream& err) {
  const Scenario sc = load_with_seed(path, c);
  if (ld_only && sc.trials < 100) {
    throw Error(ErrorKind::kInput, "trials: ld needs at least 100 trials");
  }
  const std::string hash = content_hash(to_json(sc));
  const std::string header = artifact_header(hash);
  const std::filesystem::path dir(c.out_dir);
  std::filesystem::create_directories(dir);

  const ExpectedPath expected = prepare_expected(sc);
  const DeviationSeries series = deviation_series(sc, expected, sc.grid());

  bool conclusive = false;
  write_json(dir / "ldfit.json", ld_json(series, sc.trials, conclusive), hash);
  if (!ld_only) {
    std::string nus = header;
    if (!expected.start_points.empty()) {
      nus += "# columns mean_phi_s<i> follow start point s<i>:";
      for (std::size_t s = 0; s < expected.start_points.size(); ++s) {
        nus += " s" + std::to_string(s) + "=" + fmt(expected.start_points[s]);
      }
      nus += "\n";
    }
    nus += "k";
    for (std::size_t s = 0; s < expected.means.size(); ++s) {
      nus += expected.start_points.empty() ? ",mean_phi" : ",mean_phi_s" + std::to_string(s);
    }
    nus += "\n";
    for (std::size_t k = 0; k < expected.means.front().size(); ++k) {
      nus += std::to_string(k);
      for (const auto& m : expected.means) nus += "," + fmt(m[k]);
      nus += "\n";
    }
    write_file(dir / "nus.csv", nus);

    std::string dev = header + "n,mean_D,q05,q50,q95,exceed_prob\n";
    for (std::size_t g = 0; g < series.n_grid.size(); ++g) {
      dev += std::to_string(series.n_grid[g]) + "," + fmt(series.mean[g]) + "," +
             fmt(series.q05[g]) + "," + fmt(series.q50[g]) + "," + fmt(series.q95[g]) +
             "," + fmt(series.exceed_prob[g]) + "\n";
    }
    write_file(dir / "deviations.csv", dev);

    std::string tr = header + "trial,start";
    for (auto n : series.n_grid) tr += ",D_" + std::to_string(n);
    tr += "\n";
    for (std::size_t t = 0; t < series.per_trial.size(); ++t) {
      tr += std::to_string(t) + "," + fmt(sc.start_point(static_cast<std::uint32_t>(t)));
      for (double d : series.per_trial[t]) tr += "," + fmt(d);
      tr += "\n";
    }
    write_file(dir / "trials.csv", tr);
    out << "median D_" << series.n_grid.back() << " = " << fmt(series.q50.back()) << "\n";
  }
  out << "ld: " << (conclusive ? "decay" : "inconclusive") << "\n";
  return finish(conclusive, c, err, "large-deviation fit shows no significant decay");
}

int report_exit(const ExperimentReport& report, const Common& c, std::ostream& out,
                std::ostream& err) {
  write_report(report, c.out_dir, kToolVersion);
  out << report.name << ": " << verdict_name(report.verdict) << " (" << report.reason
      << ")\n";
  return finish(report.verdict != Verdict::kInconclusive, c, err, report.reason);
}

int cmd_check_sa(const std::string& path, const Common& c, std::ostream& out,
                 std::ostream& err) {
  const json doc = read_json_file(path);
  check_version(doc, path);
  allow_only(doc, {"version", "space", "mu_sequence", "deltas", "n_probes", "pair_samples",
                   "m_cap", "seed", "propagation"});
  const PhaseSpace space = parse_space(need(doc, "space"));
  const MuSequence seq = parse_mu_sequence(need(doc, "mu_sequence"), space);
  SaProfileParams p;
  p.deltas = get_as<std::vector<double>>(doc, "deltas");
  p.n_probes = get_as<std::vector<std::int64_t>>(doc, "n_probes");
  if (doc.contains("pair_samples")) p.pair_samples = get_as<std::uint32_t>(doc, "pair_samples");
  if (doc.contains("m_cap")) p.m_cap = get_as<std::int64_t>(doc, "m_cap");
  p.seed = resolve_seed(doc, c);
  if (doc.contains("propagation")) p.propagation = parse_propagation(doc["propagation"]);
  return report_exit(standing_assumption_report(seq, doc["mu_sequence"], p), c, out, err);
}

int cmd_wasserstein(const std::string& a, const std::string& b, bool oracle,
                    std::ostream& out) {
  auto load = [](const std::string& path) {
    const json doc = read_json_file(path);
    check_version(doc, path);
    const PhaseSpace space = parse_space(need(doc, "space"));
    return parse_measure(doc, space, "measure");
  };
  const DiscreteMeasure mu = load(a);
  const DiscreteMeasure nu = load(b);
  out << "W1 " << fmt(wasserstein(mu, nu)) << "\n";
  if (oracle) out << "oracle " << fmt(wasserstein_oracle(mu, nu).cost) << "\n";
  return kExitOk;
}

int cmd_martingale(const std::string& path, const Common& c, std::ostream& out,
                   std::ostream& err) {
  const json doc = read_json_file(path);
  check_version(doc, path);
  allow_only(doc, {"version", "space", "mu_sequence", "n", "arcs", "trials", "seed", "grid",
                   "propagation", "tolerance"});
  const PhaseSpace space = parse_space(need(doc, "space"));
  const MuSequence seq = parse_mu_sequence(need(doc, "mu_sequence"), space);
  const auto n = get_as<std::int64_t>(doc, "n");
  if (n < 1) throw Error(ErrorKind::kInput, "n: must be >= 1");
  const auto arcs = get_as<std::vector<std::array<double, 2>>>(doc, "arcs");
  const std::uint32_t trials = doc.contains("trials") ? get_as<std::uint32_t>(doc, "trials") : 0;
  const std::uint64_t seed = trials > 0 ? resolve_seed(doc, c) : c.seed.value_or(0);
  const std::size_t grid =
      doc.contains("grid") ? get_as<std::size_t>(doc, "grid") : kDefaultLebesgueGrid;
  const double tol = doc.contains("tolerance") ? get_as<double>(doc, "tolerance") : 1e-9;
  PropagationConfig cfg;
  if (doc.contains("propagation")) cfg = parse_propagation(doc["propagation"]);

  json snap = doc;
  snap["seed"] = seed;
  const std::string hash = content_hash(snap);
  const auto inverse = backward_propagate(seq, n, cfg, grid);
  std::string csv = artifact_header(hash) + "i,arc_from,arc_to,lhs,rhs,abs_diff,se\n";
  bool ok = true;
  for (std::int64_t i = 1; i <= n; ++i) {
    for (const auto& a : arcs) {
      const auto r = martingale_check(seq, inverse, i, Arc{a[0], a[1]}, trials, seed);
      const double diff = std::abs(r.lhs - r.rhs);
      ok = ok && diff <= (r.exact ? tol : std::max(tol, 3.0 * r.se));
      csv += std::to_string(i) + "," + fmt(a[0]) + "," + fmt(a[1]) + "," + fmt(r.lhs) + "," +
             fmt(r.rhs) + "," + fmt(diff) + "," + fmt(r.se) + "\n";
    }
  }
  std::filesystem::create_directories(c.out_dir);
  write_file(std::filesystem::path(c.out_dir) / "martingale.csv", csv);
  out << "martingale: " << (ok ? "holds" : "violated") << "\n";
  return finish(ok, c, err, "martingale identity not within tolerance");
}

int cmd_two_point(const std::string& path, const Common& c, std::ostream& out,
                  std::ostream& err) {
  const json doc = read_json_file(path);
  check_version(doc, path);
  allow_only(doc, {"version", "space", "mu_sequence", "pairs", "m", "trials", "epsilon",
                   "seed", "level"});
  const PhaseSpace space = parse_space(need(doc, "space"));
  const MuSequence seq = parse_mu_sequence(need(doc, "mu_sequence"), space);
  const auto pairs = get_as<std::vector<std::array<double, 2>>>(doc, "pairs");
  const auto m = get_as<std::int64_t>(doc, "m");
  const auto trials = get_as<std::uint32_t>(doc, "trials");
  const auto epsilon = get_as<double>(doc, "epsilon");
  const double level = doc.contains("level") ? get_as<double>(doc, "level") : 1.0 - epsilon;
  const std::uint64_t seed = resolve_seed(doc, c);

  json snap = doc;
  snap["seed"] = seed;
  const std::string hash = content_hash(snap);
  std::vector<TwoPointProfile> profiles;
  for (const auto& p : pairs) {
    profiles.push_back(two_point_profile(seq, p[0], p[1], m, trials, seed, epsilon));
  }
  std::string csv = artifact_header(hash) + "m";
  for (std::size_t q = 0; q < pairs.size(); ++q) csv += ",prob_pair" + std::to_string(q);
  csv += "\n";
  for (std::int64_t k = 0; k <= m; ++k) {
    csv += std::to_string(k);
    for (const auto& pr : profiles) csv += "," + fmt(pr.prob[static_cast<std::size_t>(k)]);
    csv += "\n";
  }
  json summary;
  summary["level"] = level;
  summary["pairs"] = json::array();
  bool all = true;
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    const auto first = profiles[q].first_reaching(level);
    all = all && first.has_value();
    summary["pairs"].push_back({{"x", pairs[q][0]},
                                {"y", pairs[q][1]},
                                {"m_star", first ? json(*first) : json(nullptr)}});
  }
  if (space.is_projective()) {
    json fals = json::array();
    auto add = [&](const MapDistribution& d) {
      const auto v = measures_condition_falsifier(d);
      fals.push_back({{"verdict", v.passed() ? "PASS_NECESSARY" : "FAIL"},
                      {"witness", v.witness},
                      {"reason", v.reason}});
    };
    std::visit(
        [&](const auto& g) {
          using G = std::decay_t<decltype(g)>;
          if constexpr (std::is_same_v<G, MuSequence::Constant>) {
            add(g.dist);
          } else if constexpr (std::is_same_v<G, MuSequence::Periodic>) {
            for (const auto& d : g.dists) add(d);
          }
        },
        seq.generator());
    summary["falsifier"] = fals;
  }
  const std::filesystem::path dir(c.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "twopoint.csv", csv);
  write_json(dir / "twopoint.json", summary, hash);
  out << "two-point: " << (all ? "every pair reaches the level" : "some pair does not reach the level")
      << "\n";
  return finish(all, c, err, "two-point contraction level not reached");
}

void add_common(CLI::App* cmd, Common& c, bool with_seed = true) {
  if (with_seed) cmd->add_option("--seed", c.seed, "Seed (overrides the file)");
  cmd->add_option("--threads", c.threads, "Worker cap (0: all cores)");
  cmd->add_flag("--strict", c.strict, "Exit 4 on an inconclusive result");
  cmd->add_option("-o,--out", c.out_dir, "Output directory");
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInput:
    case ErrorKind::kSpaceMismatch:
    case ErrorKind::kNotInvertible:
      return kExitInput;
    case ErrorKind::kSupportOverflow:
    case ErrorKind::kOracleSizeCap:
      return kExitResource;
    case ErrorKind::kCensored:
      return kExitInconclusive;
    case ErrorKind::kInternal:
      break;
  }
  return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulator and verification suite for non-stationary random dynamical systems",
               "nonstat-rds"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  Common c;
  std::string path;
  std::string path_b;
  bool oracle = false;

  auto* sim = app.add_subcommand("simulate", "Propagate nu_n, simulate orbits, fit LD decay");
  sim->add_option("scenario", path, "Scenario JSON")->required();
  add_common(sim, c);

  auto* ld = app.add_subcommand("ld", "Large-deviation fit only");
  ld->add_option("scenario", path, "Scenario JSON")->required();
  add_common(ld, c);

  auto* sa = app.add_subcommand("check-sa", "Standing Assumption m(delta) profile");
  sa->add_option("config", path, "Profile JSON")->required();
  add_common(sa, c);

  auto* ce = app.add_subcommand("counterexample", "Reproduce a counterexample");
  ce->require_subcommand(1);
  SlowDiffusionParams slow;
  auto* ce_slow = ce->add_subcommand("slow", "Two-point system with sparse shuffles");
  ce_slow->add_option("--kmax", slow.kmax, "Epochs n_k = 2^(k^2), k <= kmax");
  ce_slow->add_option("--trials", slow.trials, "Monte Carlo trials");
  ce_slow->add_flag("--dense", slow.dense, "Shuffle at every step (control)");
  ce_slow->add_option("--dense-horizon", slow.dense_horizon, "Dense control horizon");
  ce_slow->add_option("--phi-a", slow.phi_a, "phi(a)");
  ce_slow->add_option("--phi-b", slow.phi_b, "phi(b)");
  add_common(ce_slow, c);
  RotationParams rot;
  int cos_k = 1;
  auto* ce_rot = ce->add_subcommand("rotation", "Rotation with time-dependent observables");
  ce_rot->add_option("--alpha", rot.alpha, "Rotation angle in turns");
  ce_rot->add_option("--x0", rot.x0, "Start point in turns");
  ce_rot->add_option("--horizon", rot.horizon, "Identity check horizon");
  ce_rot->add_option("--kmax", rot.kmax, "Shifted variant runs to n_kmax");
  ce_rot->add_option("--cos-k", cos_k, "phi(x) = cos(2 pi k x)");
  add_common(ce_rot, c, false);

  auto* ws = app.add_subcommand("wasserstein", "W1 distance between two measure files");
  ws->add_option("a", path, "Measure JSON")->required();
  ws->add_option("b", path_b, "Measure JSON")->required();
  ws->add_flag("--oracle", oracle, "Also solve the transportation LP");

  auto* mg = app.add_subcommand("martingale", "Backward inverse-measure martingale check");
  mg->add_option("config", path, "Martingale JSON")->required();
  add_common(mg, c);

  auto* tp = app.add_subcommand("two-point", "Two-point contraction statistics");
  tp->add_option("config", path, "Two-point JSON")->required();
  add_common(tp, c);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    apply_threads(c);
    if (*sim) return cmd_simulate(path, c, false, out, err);
    if (*ld) return cmd_simulate(path, c, true, out, err);
    if (*sa) return cmd_check_sa(path, c, out, err);
    if (*ce_slow) {
      if (!c.seed) throw Error(ErrorKind::kInput, "seed: missing; pass --seed");
      slow.seed = *c.seed;
      return report_exit(run_slow_diffusion(slow), c, out, err);
    }
    if (*ce_rot) {
      rot.phi = Observable::CosK{cos_k};
      return report_exit(run_rotation_counterexample(rot), c, out, err);
    }
    if (*ws) return cmd_wasserstein(path, path_b, oracle, out);
    if (*mg) return cmd_martingale(path, c, out, err);
    if (*tp) return cmd_two_point(path, c, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace nsrds
