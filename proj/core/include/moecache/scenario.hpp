// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moecache/kv_config.hpp"

namespace moecache {

// A scenario file is a KvConfig with three reserved keys:
//   name      = lfu-beats-lru-on-skew
//   runner    = policy-comparison
//   expect    = {"field":"margin","op":">","value":0}
// `expect` may repeat. `criterion` is an optional one-line description.
// Every other key is a parameter handed to the runner, which returns a
// metrics object; each expectation compares one of its fields (dotted path)
// against a literal value or, with {"field":...} as the value, another field.
// run_scenario adds "elapsed_s" to the metrics before evaluating.

struct Predicate {
  std::string field;
  std::string op;
  nlohmann::json value;

  static Predicate parse(const std::string& json_text);
  std::string describe() const;
};

struct Scenario {
  std::string name;
  std::string criterion;
  std::string runner;
  KvConfig params;
  std::vector<Predicate> expect;
};

Scenario parse_scenario(std::istream& in);
Scenario load_scenario(const std::filesystem::path& path);
/// All *.scn files in `dir`, ordered by file name.
std::vector<Scenario> load_scenarios(const std::filesystem::path& dir);

using ScenarioRunner = std::function<nlohmann::ordered_json(const KvConfig& params)>;

class RunnerRegistry {
 public:
  void add(std::string name, ScenarioRunner runner);
  const ScenarioRunner* find(const std::string& name) const;

  /// Registry pre-populated with every runner shipped in the library.
  static RunnerRegistry builtin();

 private:
  std::map<std::string, ScenarioRunner, std::less<>> runners_;
};

struct PredicateResult {
  Predicate predicate;
  bool passed = false;
  nlohmann::json actual;
  std::string message;
};

struct ScenarioReport {
  std::string name;
  std::string criterion;
  bool passed = false;
  /// Empty unless the pipeline itself failed ("runner", "params", "evaluate").
  std::string failed_stage;
  std::string error;
  double elapsed_s = 0.0;
  nlohmann::ordered_json metrics;
  std::vector<PredicateResult> predicates;

  nlohmann::ordered_json to_json() const;
};

ScenarioReport run_scenario(const Scenario& scenario, const RunnerRegistry& registry);

/// Looks up a dotted path ("lfu.mean_hit_rate") in a JSON object; null if absent.
nlohmann::json lookup_field(const nlohmann::ordered_json& metrics, const std::string& path);

}  // namespace moecache
