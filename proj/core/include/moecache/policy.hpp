// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "moecache/expert_set.hpp"

namespace moecache {

struct LruPolicy {
  friend bool operator==(const LruPolicy&, const LruPolicy&) = default;
};

struct LfuPolicy {
  friend bool operator==(const LfuPolicy&, const LfuPolicy&) = default;
};

/// LFU whose counts are multiplied by `decay_factor` every `decay_period` steps.
struct LfuAgedPolicy {
  double decay_factor = 0.5;
  int decay_period = 16;
  friend bool operator==(const LfuAgedPolicy&, const LfuAgedPolicy&) = default;
};

/// Belady's clairvoyant policy; needs the remaining activation stream.
struct OptPolicy {
  friend bool operator==(const OptPolicy&, const OptPolicy&) = default;
};

using PolicyKind = std::variant<LruPolicy, LfuPolicy, LfuAgedPolicy, OptPolicy>;

/// Parses "lru", "lfu", "lfu-aged", "lfu-aged:<factor>:<period>" or "opt".
PolicyKind parse_policy(std::string_view text);
std::string to_string(const PolicyKind& kind);
void validate(const PolicyKind& kind);
bool needs_future(const PolicyKind& kind);

/// Per-layer expert cache and the bookkeeping every policy needs.
struct CacheState {
  int capacity = 0;
  /// Resident experts, most recently used first.
  std::vector<ExpertId> recency;
  /// Access counts for every expert ever activated, resident or not.
  std::map<ExpertId, double> freq;
  /// Number of steps applied so far.
  long step = 0;

  ExpertSet resident() const;
  double frequency(ExpertId id) const;

  friend bool operator==(const CacheState&, const CacheState&) = default;
};

struct StepOutcome {
  ExpertSet hits;
  ExpertSet misses;
  ExpertSet evicted;
  ExpertSet loaded;
  ExpertSet resident_before;
  ExpertSet resident_after;

  friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

/// Empty cache at step 0. Throws ConfigError if capacity < 1 or the policy
/// parameters are invalid.
CacheState warm_state(const PolicyKind& kind, int capacity);

/// Applies one token's activation to `state` in place.
///
/// All misses are loaded. When the cache overflows, victims are taken from
/// the residents outside `activated`:
///   - LRU: least recently used first.
///   - LFU / LFU-aged: lowest count first, then least recently used.
///   - OPT: farthest next use in `future` first, never-reused before any
///     reused expert, then lowest id.
/// Experts activated in the same step share a recency slot; among them the
/// lower id counts as older. LFU-aged decays every count before handling
/// steps decay_period, 2*decay_period, ...
///
/// `future` must be given for OPT and only for OPT: it is the layer's
/// activation stream after this step. Throws ConfigError otherwise, or if
/// |activated| exceeds the capacity.
StepOutcome apply_step(CacheState& state, const PolicyKind& kind, const ExpertSet& activated,
                       std::optional<std::span<const ExpertSet>> future = std::nullopt);

struct PolicyStepResult {
  CacheState state;
  StepOutcome outcome;
};

/// Value-returning form of apply_step.
PolicyStepResult policy_step(const CacheState& state, const PolicyKind& kind,
                             const ExpertSet& activated,
                             std::optional<std::span<const ExpertSet>> future = std::nullopt);

}  // namespace moecache
