#include "nsrds/scenario_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "nsrds/error.hpp"

namespace nsrds {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::kInput, path + ": " + msg);
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

void allow_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> keys) {
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) fail(path, "unknown key \"" + k + "\"");
  }
}

const json& field(const json& j, const std::string& path, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing required field");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

std::int64_t integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

// Runs `make`, prefixing any domain error with the field path.
template <typename F>
auto at_path(const std::string& path, F&& make) -> decltype(make()) {
  try {
    return make();
  } catch (const Error& e) {
    const std::string what = e.what();
    if (what.rfind(path, 0) == 0) throw;
    throw Error(e.kind(), path + ": " + what);
  }
}

MapAtom parse_atom(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string type = text(field(j, path, "type"), path + ".type");
  double p = 1.0;
  if (j.contains("p")) p = number(j["p"], path + ".p");
  if (type == "affine") {
    allow_keys(j, path, {"type", "a", "b", "p"});
    return {AffineMap{number(field(j, path, "a"), path + ".a"),
                      number(field(j, path, "b"), path + ".b")},
            p};
  }
  if (type == "moebius") {
    allow_keys(j, path, {"type", "m", "p"});
    const json& m = field(j, path, "m");
    if (!m.is_array() || m.size() != 2 || !m[0].is_array() || !m[1].is_array() ||
        m[0].size() != 2 || m[1].size() != 2) {
      fail(path + ".m", "expected [[a, b], [c, d]]");
    }
    const Mat2 mat{number(m[0][0], path + ".m"), number(m[0][1], path + ".m"),
                   number(m[1][0], path + ".m"), number(m[1][1], path + ".m")};
    at_path(path + ".m", [&] {
      require_sl2(mat);
      return 0;
    });
    return {MoebiusMap{mat}, p};
  }
  if (type == "permutation") {
    allow_keys(j, path, {"type", "table", "p"});
    const json& t = field(j, path, "table");
    if (!t.is_array()) fail(path + ".table", "expected an array of indices");
    PermutationMap perm;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto v = integer(t[i], path + ".table[" + std::to_string(i) + "]");
      if (v < 0) fail(path + ".table", "indices must be nonnegative");
      perm.table.push_back(static_cast<std::size_t>(v));
    }
    return {perm, p};
  }
  if (type == "rotation") {
    allow_keys(j, path, {"type", "alpha", "p"});
    return {RotationMap{number(field(j, path, "alpha"), path + ".alpha")}, p};
  }
  fail(path + ".type", "unknown map type \"" + type + "\"");
}

double parse_point(const json& j, const PhaseSpace& space, const std::string& path) {
  if (j.is_string() && space.is_finite()) {
    const auto& labels = space.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == j.get<std::string>()) return static_cast<double>(i);
    }
    fail(path, "unknown label \"" + j.get<std::string>() + "\"");
  }
  const double x = number(j, path);
  if (!space.contains(x)) fail(path, "point lies outside " + space.describe());
  return x;
}

}  // namespace

PhaseSpace parse_space(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string kind = text(field(j, path, "kind"), path + ".kind");
  return at_path(path, [&]() -> PhaseSpace {
    if (kind == "interval") {
      allow_keys(j, path, {"kind", "lo", "hi"});
      return PhaseSpace::interval(number(field(j, path, "lo"), path + ".lo"),
                                  number(field(j, path, "hi"), path + ".hi"));
    }
    if (kind == "projective") {
      allow_keys(j, path, {"kind"});
      return PhaseSpace::projective_line();
    }
    if (kind == "finite") {
      allow_keys(j, path, {"kind", "labels", "metric"});
      const json& lj = field(j, path, "labels");
      if (!lj.is_array()) fail(path + ".labels", "expected an array of strings");
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < lj.size(); ++i) {
        labels.push_back(text(lj[i], path + ".labels[" + std::to_string(i) + "]"));
      }
      std::vector<std::vector<double>> metric;
      if (j.contains("metric")) {
        const json& mj = j["metric"];
        if (!mj.is_array()) fail(path + ".metric", "expected a square table");
        for (std::size_t i = 0; i < mj.size(); ++i) {
          metric.push_back(numbers(mj[i], path + ".metric[" + std::to_string(i) + "]"));
        }
      } else {
        const std::size_t n = labels.size();
        metric.assign(n, std::vector<double>(n, 1.0));
        for (std::size_t i = 0; i < n; ++i) metric[i][i] = 0.0;
      }
      return PhaseSpace::finite_set(std::move(labels), std::move(metric));
    }
    fail(path + ".kind", "unknown space kind \"" + kind + "\"");
  });
}

MapDistribution parse_map_distribution(const json& j, const PhaseSpace& space,
                                       const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of map atoms");
  std::vector<MapAtom> atoms;
  for (std::size_t i = 0; i < j.size(); ++i) {
    atoms.push_back(parse_atom(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return at_path(path, [&] { return MapDistribution(space, std::move(atoms)); });
}

MuSequence parse_mu_sequence(const json& j, const PhaseSpace& space,
                             const std::string& path) {
  require_object(j, path);
  const std::string kind = text(field(j, path, "kind"), path + ".kind");
  if (kind == "constant") {
    allow_keys(j, path, {"kind", "dist"});
    return MuSequence::constant(
        parse_map_distribution(field(j, path, "dist"), space, path + ".dist"));
  }
  if (kind == "periodic") {
    allow_keys(j, path, {"kind", "dists"});
    const json& ds = field(j, path, "dists");
    if (!ds.is_array() || ds.empty()) fail(path + ".dists", "expected a nonempty array");
    std::vector<MapDistribution> dists;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      dists.push_back(parse_map_distribution(
          ds[i], space, path + ".dists[" + std::to_string(i) + "]"));
    }
    return MuSequence::periodic(std::move(dists));
  }
  if (kind == "scripted") {
    allow_keys(j, path, {"kind", "steps", "default"});
    const json& st = field(j, path, "steps");
    if (!st.is_array()) fail(path + ".steps", "expected an array");
    std::vector<MapDistribution> steps;
    for (std::size_t i = 0; i < st.size(); ++i) {
      steps.push_back(parse_map_distribution(
          st[i], space, path + ".steps[" + std::to_string(i) + "]"));
    }
    auto fallback =
        parse_map_distribution(field(j, path, "default"), space, path + ".default");
    return MuSequence(MuSequence::Scripted{std::move(steps), std::move(fallback)});
  }
  if (kind == "two_point_sparse") {
    allow_keys(j, path, {"kind", "shuffle_times", "kmax", "every_step", "swap_prob"});
    if (!(space == PhaseSpace::two_point())) {
      fail(path, "two_point_sparse needs space {\"kind\":\"finite\",\"labels\":[\"a\",\"b\"]}");
    }
    MuSequence::TwoPointSparse t;
    if (j.contains("shuffle_times") && j.contains("kmax")) {
      fail(path, "give either shuffle_times or kmax, not both");
    }
    if (j.contains("shuffle_times")) {
      const json& ts = j["shuffle_times"];
      if (!ts.is_array()) fail(path + ".shuffle_times", "expected an array of integers");
      for (std::size_t i = 0; i < ts.size(); ++i) {
        t.shuffle_times.push_back(
            integer(ts[i], path + ".shuffle_times[" + std::to_string(i) + "]"));
      }
    } else if (j.contains("kmax")) {
      const auto kmax = integer(j["kmax"], path + ".kmax");
      t.shuffle_times = at_path(path + ".kmax", [&] {
        return sparse_schedule(static_cast<int>(kmax));
      });
    }
    if (j.contains("every_step")) {
      if (!j["every_step"].is_boolean()) fail(path + ".every_step", "expected a boolean");
      t.every_step = j["every_step"].get<bool>();
    }
    if (j.contains("swap_prob")) t.swap_prob = number(j["swap_prob"], path + ".swap_prob");
    return at_path(path, [&] { return MuSequence(std::move(t)); });
  }
  fail(path + ".kind", "unknown sequence kind \"" + kind + "\"");
}

Observable parse_observable(const json& j, const PhaseSpace& space,
                            const std::string& path) {
  require_object(j, path);
  const std::string kind = text(field(j, path, "kind"), path + ".kind");
  Observable::Form form = Observable::Affine{0.0, 1.0};
  if (kind == "affine") {
    allow_keys(j, path, {"kind", "c0", "c1"});
    form = Observable::Affine{number(field(j, path, "c0"), path + ".c0"),
                              number(field(j, path, "c1"), path + ".c1")};
  } else if (kind == "poly") {
    allow_keys(j, path, {"kind", "coeffs"});
    form = Observable::Poly{numbers(field(j, path, "coeffs"), path + ".coeffs")};
  } else if (kind == "cos") {
    allow_keys(j, path, {"kind", "k"});
    form = Observable::CosK{static_cast<int>(integer(field(j, path, "k"), path + ".k"))};
  } else if (kind == "indicator") {
    allow_keys(j, path, {"kind", "from", "to"});
    form = Observable::Indicator{number(field(j, path, "from"), path + ".from"),
                                 number(field(j, path, "to"), path + ".to")};
  } else if (kind == "table") {
    allow_keys(j, path, {"kind", "values"});
    form = Observable::Table{numbers(field(j, path, "values"), path + ".values")};
  } else {
    fail(path + ".kind", "unknown observable kind \"" + kind + "\"");
  }
  return at_path(path, [&] { return Observable(space, std::move(form)); });
}

DiscreteMeasure parse_measure(const json& j, const PhaseSpace& space,
                              const std::string& path) {
  require_object(j, path);
  allow_keys(j, path, {"support", "weights", "space", "version"});
  const json& sj = field(j, path, "support");
  if (!sj.is_array()) fail(path + ".support", "expected an array");
  std::vector<double> support;
  for (std::size_t i = 0; i < sj.size(); ++i) {
    support.push_back(parse_point(sj[i], space, path + ".support[" + std::to_string(i) + "]"));
  }
  auto weights = numbers(field(j, path, "weights"), path + ".weights");
  return at_path(path + ".weights", [&] {
    return DiscreteMeasure(space, std::move(support), std::move(weights));
  });
}

PropagationConfig parse_propagation(const json& j, const std::string& path) {
  require_object(j, path);
  allow_keys(j, path, {"max_support", "prune", "resample_seed"});
  PropagationConfig cfg;
  if (j.contains("max_support")) {
    const auto v = integer(j["max_support"], path + ".max_support");
    if (v < 1) fail(path + ".max_support", "must be positive");
    cfg.max_support = static_cast<std::size_t>(v);
  }
  if (j.contains("resample_seed")) {
    if (!j["resample_seed"].is_number_unsigned()) {
      fail(path + ".resample_seed", "expected a nonnegative integer");
    }
    cfg.resample_seed = j["resample_seed"].get<std::uint64_t>();
  }
  if (j.contains("prune")) {
    const json& pj = j["prune"];
    const std::string pp = path + ".prune";
    require_object(pj, pp);
    const std::string mode = text(field(pj, pp, "mode"), pp + ".mode");
    if (mode == "merge") {
      allow_keys(pj, pp, {"mode"});
      cfg.prune = PropagationConfig::MergeDuplicates{};
    } else if (mode == "truncate") {
      allow_keys(pj, pp, {"mode", "epsilon"});
      cfg.prune = PropagationConfig::WeightTruncate{
          number(field(pj, pp, "epsilon"), pp + ".epsilon")};
    } else if (mode == "resample") {
      allow_keys(pj, pp, {"mode", "n"});
      const auto n = integer(field(pj, pp, "n"), pp + ".n");
      if (n < 1) fail(pp + ".n", "must be positive");
      cfg.prune = PropagationConfig::SystematicResample{static_cast<std::size_t>(n)};
    } else {
      fail(pp + ".mode", "unknown prune mode \"" + mode + "\"");
    }
  }
  at_path(path, [&] {
    cfg.validate();
    return 0;
  });
  return cfg;
}

Scenario parse_scenario(const json& j) {
  require_object(j, "scenario");
  allow_keys(j, "scenario",
             {"version", "space", "mu_sequence", "nu0", "observable", "horizon",
              "trials", "seed", "epsilon", "start_points", "propagation", "n_grid"});
  const std::string version = text(field(j, "scenario", "version"), "version");
  if (version != kScenarioVersion) {
    fail("version", "expected \"" + std::string(kScenarioVersion) + "\", got \"" +
                        version + "\"");
  }
  PhaseSpace space = parse_space(field(j, "scenario", "space"));
  MuSequence seq = parse_mu_sequence(field(j, "scenario", "mu_sequence"), space);
  Observable phi = parse_observable(field(j, "scenario", "observable"), space);

  std::optional<DiscreteMeasure> nu0;
  if (j.contains("nu0") && !j["nu0"].is_null()) nu0 = parse_measure(j["nu0"], space, "nu0");

  const auto horizon = integer(field(j, "scenario", "horizon"), "horizon");
  if (horizon < 1) fail("horizon", "must be >= 1");
  const auto trials = integer(field(j, "scenario", "trials"), "trials");
  if (trials < 1 || trials > 0xFFFFFFFFll) fail("trials", "must lie in [1, 2^32)");
  std::uint64_t seed = 0;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) fail("seed", "expected a nonnegative integer");
    seed = j["seed"].get<std::uint64_t>();
  }
  const double epsilon = number(field(j, "scenario", "epsilon"), "epsilon");
  if (!(epsilon > 0.0)) fail("epsilon", "must be > 0");
  const json& sp = field(j, "scenario", "start_points");
  if (!sp.is_array() || sp.empty()) fail("start_points", "expected a nonempty array");
  std::vector<double> starts;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    starts.push_back(parse_point(sp[i], space, "start_points[" + std::to_string(i) + "]"));
  }
  PropagationConfig cfg;
  if (j.contains("propagation")) cfg = parse_propagation(j["propagation"]);
  std::vector<std::int64_t> grid;
  if (j.contains("n_grid")) {
    const json& g = j["n_grid"];
    if (!g.is_array()) fail("n_grid", "expected an array of integers");
    for (std::size_t i = 0; i < g.size(); ++i) {
      grid.push_back(integer(g[i], "n_grid[" + std::to_string(i) + "]"));
    }
  }
  Scenario sc{std::move(space),
              std::move(seq),
              std::move(nu0),
              std::move(phi),
              horizon,
              static_cast<std::uint32_t>(trials),
              seed,
              epsilon,
              std::move(starts),
              cfg,
              std::move(grid)};
  at_path("scenario", [&] {
    sc.validate();
    return 0;
  });
  return sc;
}

json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::kInput, file.string() + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kInput, file.string() + ": " + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& file) {
  return parse_scenario(read_json_file(file));
}

json to_json(const PhaseSpace& space) {
  switch (space.kind()) {
    case PhaseSpace::Kind::kInterval:
      return {{"kind", "interval"}, {"lo", space.lo()}, {"hi", space.hi()}};
    case PhaseSpace::Kind::kProjectiveLine:
      return {{"kind", "projective"}};
    case PhaseSpace::Kind::kFiniteSet:
      return {{"kind", "finite"}, {"labels", space.labels()}, {"metric", space.metric()}};
  }
  return {};
}

json to_json(const Map& map) {
  return std::visit(
      Overloaded{
          [](const AffineMap& m) -> json {
            return {{"type", "affine"}, {"a", m.a}, {"b", m.b}};
          },
          [](const MoebiusMap& m) -> json {
            return {{"type", "moebius"},
                    {"m", json::array({json::array({m.m.a, m.m.b}),
                                       json::array({m.m.c, m.m.d})})}};
          },
          [](const PermutationMap& m) -> json {
            return {{"type", "permutation"}, {"table", m.table}};
          },
          [](const RotationMap& m) -> json {
            return {{"type", "rotation"}, {"alpha", m.alpha}};
          },
      },
      map);
}

json to_json(const MapDistribution& dist) {
  json out = json::array();
  for (const auto& atom : dist.atoms()) {
    json a = to_json(atom.map);
    a["p"] = atom.prob;
    out.push_back(std::move(a));
  }
  return out;
}

json to_json(const MuSequence& seq) {
  return std::visit(
      Overloaded{
          [](const MuSequence::Constant& c) -> json {
            return {{"kind", "constant"}, {"dist", to_json(c.dist)}};
          },
          [](const MuSequence::Periodic& p) -> json {
            json ds = json::array();
            for (const auto& d : p.dists) ds.push_back(to_json(d));
            return {{"kind", "periodic"}, {"dists", ds}};
          },
          [](const MuSequence::Scripted& s) -> json {
            json st = json::array();
            for (const auto& d : s.steps) st.push_back(to_json(d));
            return {{"kind", "scripted"}, {"steps", st}, {"default", to_json(s.fallback)}};
          },
          [](const MuSequence::TwoPointSparse& t) -> json {
            return {{"kind", "two_point_sparse"},
                    {"shuffle_times", t.shuffle_times},
                    {"every_step", t.every_step},
                    {"swap_prob", t.swap_prob}};
          },
      },
      seq.generator());
}

json to_json(const Observable::Form& form) {
  return std::visit(
      Overloaded{
          [](const Observable::Affine& a) -> json {
            return {{"kind", "affine"}, {"c0", a.c0}, {"c1", a.c1}};
          },
          [](const Observable::Poly& p) -> json {
            return {{"kind", "poly"}, {"coeffs", p.coeffs}};
          },
          [](const Observable::CosK& c) -> json { return {{"kind", "cos"}, {"k", c.k}}; },
          [](const Observable::Indicator& i) -> json {
            return {{"kind", "indicator"}, {"from", i.from}, {"to", i.to}};
          },
          [](const Observable::Table& t) -> json {
            return {{"kind", "table"}, {"values", t.values}};
          },
      },
      form);
}

json to_json(const DiscreteMeasure& m) {
  return {{"support", std::vector<double>(m.support().begin(), m.support().end())},
          {"weights", std::vector<double>(m.weights().begin(), m.weights().end())}};
}

json to_json(const PropagationConfig& cfg) {
  json prune = std::visit(
      Overloaded{
          [](const PropagationConfig::MergeDuplicates&) -> json {
            return {{"mode", "merge"}};
          },
          [](const PropagationConfig::WeightTruncate& t) -> json {
            return {{"mode", "truncate"}, {"epsilon", t.epsilon}};
          },
          [](const PropagationConfig::SystematicResample& r) -> json {
            return {{"mode", "resample"}, {"n", r.n}};
          },
      },
      cfg.prune);
  return {{"max_support", cfg.max_support},
          {"prune", prune},
          {"resample_seed", cfg.resample_seed}};
}

json to_json(const Scenario& sc) {
  json out = {{"version", kScenarioVersion},
              {"space", to_json(sc.space)},
              {"mu_sequence", to_json(sc.seq)},
              {"observable", to_json(sc.observable.form())},
              {"horizon", sc.horizon},
              {"trials", sc.trials},
              {"seed", sc.seed},
              {"epsilon", sc.epsilon},
              {"start_points", sc.start_points},
              {"propagation", to_json(sc.propagation)}};
  if (sc.nu0) out["nu0"] = to_json(*sc.nu0);
  if (!sc.n_grid.empty()) out["n_grid"] = sc.n_grid;
  return out;
}

std::string content_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nsrds
