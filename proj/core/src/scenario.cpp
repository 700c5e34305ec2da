// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "moecache/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include "moecache/error.hpp"

namespace moecache {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kOps[] = {"==", "!=", "<", "<=", ">", ">="};

bool compare(const json& actual, const std::string& op, const json& expected) {
  if (actual.is_number() && expected.is_number()) {
    const double a = actual.get<double>();
    const double b = expected.get<double>();
    if (op == "==") return a == b;
    if (op == "!=") return a != b;
    if (op == "<") return a < b;
    if (op == "<=") return a <= b;
    if (op == ">") return a > b;
    return a >= b;
  }
  if (op == "==") return actual == expected;
  if (op == "!=") return actual != expected;
  throw ConfigError("operator " + op + " needs numeric operands");
}

}  // namespace

Predicate Predicate::parse(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("expectation is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("field") || !j["field"].is_string() || !j.contains("op") ||
      !j["op"].is_string() || !j.contains("value")) {
    throw ConfigError("expectation needs string \"field\", string \"op\" and \"value\": " +
                      json_text);
  }
  Predicate p{j["field"].get<std::string>(), j["op"].get<std::string>(), j["value"]};
  if (std::find(std::begin(kOps), std::end(kOps), p.op) == std::end(kOps)) {
    throw ConfigError("unknown operator \"" + p.op + "\"");
  }
  return p;
}

std::string Predicate::describe() const {
  return field + " " + op + " " + value.dump();
}

Scenario parse_scenario(std::istream& in) {
  const KvConfig kv = KvConfig::parse(in);
  Scenario s;
  s.name = kv.get_string("name", "");
  s.runner = kv.get_string("runner", "");
  s.criterion = kv.get_string("criterion", "");
  if (s.name.empty()) throw ConfigError("scenario has no name");
  if (s.runner.empty()) throw ConfigError("scenario \"" + s.name + "\" has no runner");
  for (const auto& text : kv.get_all("expect")) s.expect.push_back(Predicate::parse(text));
  for (const auto& [k, v] : kv.entries()) {
    if (k != "name" && k != "runner" && k != "criterion" && k != "expect") s.params.set(k, v);
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario " + path.string());
  try {
    return parse_scenario(in);
  } catch (const Error& e) {
    throw ConfigError(path.filename().string() + ": " + e.what());
  }
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".scn") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Scenario> out;
  for (const auto& f : files) out.push_back(load_scenario(f));
  return out;
}

void RunnerRegistry::add(std::string name, ScenarioRunner runner) {
  runners_[std::move(name)] = std::move(runner);
}

const ScenarioRunner* RunnerRegistry::find(const std::string& name) const {
  auto it = runners_.find(name);
  return it == runners_.end() ? nullptr : &it->second;
}

json lookup_field(const ordered_json& metrics, const std::string& path) {
  const ordered_json* node = &metrics;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) return nullptr;
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return json::parse(node->dump());
}

ScenarioReport run_scenario(const Scenario& scenario, const RunnerRegistry& registry) {
  ScenarioReport report;
  report.name = scenario.name;
  report.criterion = scenario.criterion;

  const ScenarioRunner* runner = registry.find(scenario.runner);
  if (runner == nullptr) {
    report.failed_stage = "runner";
    report.error = "no runner named \"" + scenario.runner + "\"";
    return report;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    report.metrics = (*runner)(scenario.params);
  } catch (const ConfigError& e) {
    report.failed_stage = "params";
    report.error = e.what();
  } catch (const std::exception& e) {
    report.failed_stage = "runner";
    report.error = e.what();
  }
  report.elapsed_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!report.failed_stage.empty()) return report;
  report.metrics["elapsed_s"] = report.elapsed_s;

  report.passed = true;
  for (const auto& p : scenario.expect) {
    PredicateResult r{p, false, lookup_field(report.metrics, p.field), ""};
    json expected = p.value;
    if (expected.is_object() && expected.contains("field")) {
      expected = lookup_field(report.metrics, expected["field"].get<std::string>());
    }
    if (r.actual.is_null() || expected.is_null()) {
      r.message = "field missing from metrics";
    } else {
      try {
        r.passed = compare(r.actual, p.op, expected);
        r.message = r.passed ? "ok" : "got " + r.actual.dump() + ", wanted " + p.op + " " + expected.dump();
      } catch (const ConfigError& e) {
        r.message = e.what();
      }
    }
    report.passed = report.passed && r.passed;
    report.predicates.push_back(std::move(r));
  }
  if (scenario.expect.empty()) {
    report.passed = false;
    report.failed_stage = "evaluate";
    report.error = "scenario declares no expectations";
  }
  return report;
}

ordered_json ScenarioReport::to_json() const {
  ordered_json j;
  j["name"] = name;
  j["criterion"] = criterion;
  j["passed"] = passed;
  if (!failed_stage.empty()) {
    j["failed_stage"] = failed_stage;
    j["error"] = error;
  }
  j["elapsed_s"] = elapsed_s;
  ordered_json preds = ordered_json::array();
  for (const auto& p : predicates) {
    ordered_json pj;
    pj["expect"] = p.predicate.describe();
    pj["passed"] = p.passed;
    pj["actual"] = p.actual;
    pj["message"] = p.message;
    preds.push_back(std::move(pj));
  }
  j["predicates"] = std::move(preds);
  j["metrics"] = metrics;
  return j;
}

}  // namespace moecache
