// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "json_lines.hpp"
#include "moecache/cache_sim.hpp"
#include "moecache/error.hpp"

namespace moecache {

using nlohmann::ordered_json;

void write_event_log(std::ostream& out, const CacheEventLog& log) {
  ordered_json h;
  h["kind"] = "events";
  h["policy"] = to_string(log.config.policy);
  h["cache_size"] = log.config.cache_size;
  h["warmup_tokens"] = log.config.warmup_tokens;
  h["num_layers"] = log.shape.num_layers;
  h["num_experts"] = log.shape.num_experts;
  h["top_k"] = log.shape.top_k;
  h["num_tokens"] = log.num_tokens;
  h["layers"] = log.layers();
  detail::write_line(out, h);
  for (const auto& s : log.steps) {
    ordered_json j;
    j["t"] = s.token;
    j["l"] = s.layer;
    j["cached"] = detail::to_json_array(s.outcome.resident_before);
    j["hit"] = detail::to_json_array(s.outcome.hits);
    j["miss"] = detail::to_json_array(s.outcome.misses);
    j["evict"] = detail::to_json_array(s.outcome.evicted);
    detail::write_line(out, j);
  }
  out.flush();
  if (!out) throw IoError("failed writing event log");
}

CacheEventLog read_event_log(std::istream& in) {
  detail::LineReader reader(in);
  auto h = reader.next();
  if (!h) throw ParseError("missing header line", 1);
  const std::size_t hl = reader.line_number();
  detail::expect_keys(*h,
                      {"kind", "policy", "cache_size", "warmup_tokens", "num_layers",
                       "num_experts", "top_k", "num_tokens", "layers"},
                      hl);
  if ((*h)["kind"] != "events") throw ParseError("header kind must be \"events\"", hl);
  if (!(*h)["policy"].is_string()) throw ParseError("\"policy\" must be a string", hl);

  CacheEventLog log;
  try {
    log.config.policy = parse_policy((*h)["policy"].get<std::string>());
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), hl);
  }
  log.config.cache_size = detail::get_int(*h, "cache_size", hl);
  log.config.warmup_tokens = detail::get_int(*h, "warmup_tokens", hl);
  log.shape.num_layers = detail::get_int(*h, "num_layers", hl);
  log.shape.num_experts = detail::get_int(*h, "num_experts", hl);
  log.shape.top_k = detail::get_int(*h, "top_k", hl);
  log.num_tokens = detail::get_int(*h, "num_tokens", hl);
  try {
    log.shape.validate();
  } catch (const ConfigError& e) {
    throw ValidationError("line " + std::to_string(hl) + ": " + e.what());
  }

  std::vector<int> layers;
  const auto& jl = (*h)["layers"];
  if (!jl.is_array()) throw ParseError("\"layers\" must be an array", hl);
  for (const auto& v : jl) {
    if (!v.is_number_integer()) throw ParseError("\"layers\" must hold integers", hl);
    const int l = v.get<int>();
    if (l < 0 || l >= log.shape.num_layers) {
      throw ValidationError("line " + std::to_string(hl) + ": layer out of range");
    }
    layers.push_back(l);
  }
  if (static_cast<int>(layers.size()) != log.shape.num_layers) log.config.layers = layers;
  const auto expected_layers = log.layers();

  while (auto j = reader.next()) {
    const std::size_t line = reader.line_number();
    detail::expect_keys(*j, {"t", "l", "cached", "hit", "miss", "evict"}, line);
    SimStep s;
    s.token = detail::get_int(*j, "t", line);
    s.layer = detail::get_int(*j, "l", line);
    s.outcome.resident_before = detail::get_set(*j, "cached", line);
    s.outcome.hits = detail::get_set(*j, "hit", line);
    s.outcome.misses = detail::get_set(*j, "miss", line);
    s.outcome.evicted = detail::get_set(*j, "evict", line);
    s.outcome.loaded = s.outcome.misses;

    if (expected_layers.empty()) {
      throw ValidationError("line " + std::to_string(line) + ": step for an empty layer selection");
    }
    const std::size_t index = log.steps.size();
    const auto want_token = static_cast<int>(index / expected_layers.size());
    const int want_layer = expected_layers[index % expected_layers.size()];
    if (s.token != want_token || s.layer != want_layer) {
      throw ValidationError("line " + std::to_string(line) + ": expected step (token " +
                            std::to_string(want_token) + ", layer " +
                            std::to_string(want_layer) + ")");
    }
    if (set_intersection(s.outcome.hits, s.outcome.misses).size() != 0 ||
        set_difference(s.outcome.hits, s.outcome.resident_before).size() != 0 ||
        set_intersection(s.outcome.misses, s.outcome.resident_before).size() != 0 ||
        set_difference(s.outcome.evicted, s.outcome.resident_before).size() != 0) {
      throw ValidationError("line " + std::to_string(line) + ": inconsistent step sets");
    }
    s.outcome.resident_after =
        set_union(set_difference(s.outcome.resident_before, s.outcome.evicted), s.outcome.misses);
    if (static_cast<int>(s.outcome.resident_after.size()) > log.config.cache_size) {
      throw ValidationError("line " + std::to_string(line) + ": cache size exceeded");
    }
    log.steps.push_back(std::move(s));
  }
  if (log.steps.size() != static_cast<std::size_t>(log.num_tokens) * expected_layers.size()) {
    throw ValidationError("event log has " + std::to_string(log.steps.size()) +
                          " steps, header implies " +
                          std::to_string(log.num_tokens * expected_layers.size()));
  }
  return log;
}

void save_event_log(const std::filesystem::path& path, const CacheEventLog& log) {
  auto out = detail::open_for_write(path);
  write_event_log(out, log);
}

CacheEventLog load_event_log(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  return read_event_log(in);
}

}  // namespace moecache
