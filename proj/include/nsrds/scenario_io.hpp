#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "nsrds/measures.hpp"
#include "nsrds/models.hpp"
#include "nsrds/observable.hpp"
#include "nsrds/propagation.hpp"
#include "nsrds/simulate.hpp"

namespace nsrds {

inline constexpr const char* kScenarioVersion = "nonstat-rds/1";
inline constexpr const char* kToolVersion = "nonstat-rds 0.1.0";

// Decoders throw Error(kInput) naming the offending field path, e.g.
// "mu_sequence.dist[1].p: ...". Unknown keys are rejected.
PhaseSpace parse_space(const nlohmann::json& j, const std::string& path = "space");
MapDistribution parse_map_distribution(const nlohmann::json& j,
                                       const PhaseSpace& space,
                                       const std::string& path);
MuSequence parse_mu_sequence(const nlohmann::json& j, const PhaseSpace& space,
                             const std::string& path = "mu_sequence");
Observable parse_observable(const nlohmann::json& j, const PhaseSpace& space,
                            const std::string& path = "observable");
DiscreteMeasure parse_measure(const nlohmann::json& j, const PhaseSpace& space,
                              const std::string& path);
PropagationConfig parse_propagation(const nlohmann::json& j,
                                    const std::string& path = "propagation");
Scenario parse_scenario(const nlohmann::json& j);

// Reads and parses a JSON file; syntax errors report line and column.
nlohmann::json read_json_file(const std::filesystem::path& file);
Scenario load_scenario(const std::filesystem::path& file);

nlohmann::json to_json(const PhaseSpace& space);
nlohmann::json to_json(const Map& map);
nlohmann::json to_json(const MapDistribution& dist);
nlohmann::json to_json(const MuSequence& seq);
nlohmann::json to_json(const Observable::Form& form);
nlohmann::json to_json(const DiscreteMeasure& m);
nlohmann::json to_json(const PropagationConfig& cfg);
nlohmann::json to_json(const Scenario& sc);

// FNV-1a 64 of the compact dump, as 16 hex digits.
std::string content_hash(const nlohmann::json& j);

}  // namespace nsrds
