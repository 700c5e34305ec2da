// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "moecache/policy.hpp"
#include "moecache/trace.hpp"

namespace moecache {

struct SimConfig {
  PolicyKind policy = LruPolicy{};
  int cache_size = 4;
  /// Leading tokens excluded from metrics (still simulated).
  int warmup_tokens = 0;
  /// Layers to simulate; all layers when unset.
  std::optional<std::vector<int>> layers;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct SimStep {
  int token = 0;
  int layer = 0;
  StepOutcome outcome;

  const ExpertSet& cached() const noexcept { return outcome.resident_before; }
  /// The step's activated set, hits plus misses.
  ExpertSet activated() const;

  friend bool operator==(const SimStep&, const SimStep&) = default;
};

/// Complete per-step cache history of one simulation, ordered by (token, layer).
struct CacheEventLog {
  SimConfig config;
  ModelShape shape;
  int num_tokens = 0;
  std::vector<SimStep> steps;

  /// Layers present in the log, ascending.
  std::vector<int> layers() const;
  bool has_layer(int layer) const;
  /// Steps of one layer in token order.
  std::vector<SimStep> layer_steps(int layer) const;

  friend bool operator==(const CacheEventLog&, const CacheEventLog&) = default;
};

/// Replays the configured policy independently for every selected layer,
/// starting from an empty cache. Throws ConfigError if top_k > cache_size or a
/// selected layer is out of range.
CacheEventLog simulate(const ActivationTrace& trace, const SimConfig& config);

/// Cache size that leaves `offloads` experts of each layer on the host.
/// Throws ConfigError unless 0 <= offloads < num_experts.
int offloads_to_cache_size(int offloads, const ModelShape& shape);

// Event log JSON Lines format:
//   {"kind":"events","policy":"lru","cache_size":4,"warmup_tokens":0,
//    "num_layers":32,"num_experts":8,"top_k":2,"num_tokens":T,"layers":[...]}
//   {"t":0,"l":0,"cached":[...],"hit":[...],"miss":[...],"evict":[...]}
void write_event_log(std::ostream& out, const CacheEventLog& log);
CacheEventLog read_event_log(std::istream& in);
void save_event_log(const std::filesystem::path& path, const CacheEventLog& log);
CacheEventLog load_event_log(const std::filesystem::path& path);

}  // namespace moecache
