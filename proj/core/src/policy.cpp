// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "moecache/policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "moecache/error.hpp"

namespace moecache {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double parse_double(std::string_view s, std::string_view context) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("bad number \"" + std::string(s) + "\" in policy \"" +
                      std::string(context) + "\"");
  }
  return v;
}

int parse_int(std::string_view s, std::string_view context) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("bad integer \"" + std::string(s) + "\" in policy \"" +
                      std::string(context) + "\"");
  }
  return v;
}

// Position of `id` in the recency list; larger means less recently used.
std::size_t age_rank(const std::vector<ExpertId>& recency, ExpertId id) {
  return static_cast<std::size_t>(std::find(recency.begin(), recency.end(), id) -
                                  recency.begin());
}

std::size_t next_use(std::span<const ExpertSet> future, ExpertId id) {
  for (std::size_t i = 0; i < future.size(); ++i) {
    if (future[i].contains(id)) return i;
  }
  return std::numeric_limits<std::size_t>::max();
}

// Picks one victim among `candidates` (non-empty, all resident).
ExpertId choose_victim(const CacheState& state, const PolicyKind& kind,
                       const std::vector<ExpertId>& candidates,
                       std::optional<std::span<const ExpertSet>> future) {
  return std::visit(
      overloaded{
          [&](const LruPolicy&) {
            return *std::max_element(candidates.begin(), candidates.end(),
                                     [&](ExpertId a, ExpertId b) {
                                       return age_rank(state.recency, a) <
                                              age_rank(state.recency, b);
                                     });
          },
          [&](const OptPolicy&) {
            // Farthest next use first; equal distances go to the lower id.
            ExpertId best = candidates.front();
            std::size_t best_use = next_use(*future, best);
            for (ExpertId id : candidates) {
              const std::size_t use = next_use(*future, id);
              if (use > best_use || (use == best_use && id < best)) {
                best = id;
                best_use = use;
              }
            }
            return best;
          },
          [&](const auto&) {
            // LFU and LFU-aged: lowest count, then oldest, then lowest id.
            // Recency ranks are unique, so the id rule never fires for residents.
            ExpertId best = candidates.front();
            for (ExpertId id : candidates) {
              const double f = state.frequency(id);
              const double best_f = state.frequency(best);
              if (f < best_f ||
                  (f == best_f && age_rank(state.recency, id) > age_rank(state.recency, best))) {
                best = id;
              }
            }
            return best;
          },
      },
      kind);
}

}  // namespace

PolicyKind parse_policy(std::string_view text) {
  if (text == "lru") return LruPolicy{};
  if (text == "lfu") return LfuPolicy{};
  if (text == "opt") return OptPolicy{};
  if (text == "lfu-aged") return LfuAgedPolicy{};
  constexpr std::string_view prefix = "lfu-aged:";
  if (text.starts_with(prefix)) {
    auto rest = text.substr(prefix.size());
    auto colon = rest.find(':');
    if (colon == std::string_view::npos) {
      throw ConfigError("expected lfu-aged:<factor>:<period>, got \"" + std::string(text) + "\"");
    }
    LfuAgedPolicy p;
    p.decay_factor = parse_double(rest.substr(0, colon), text);
    p.decay_period = parse_int(rest.substr(colon + 1), text);
    validate(PolicyKind{p});
    return p;
  }
  throw ConfigError("unknown policy \"" + std::string(text) +
                    "\" (expected lru, lfu, lfu-aged:<factor>:<period>, opt)");
}

std::string to_string(const PolicyKind& kind) {
  return std::visit(overloaded{
                        [](const LruPolicy&) -> std::string { return "lru"; },
                        [](const LfuPolicy&) -> std::string { return "lfu"; },
                        [](const OptPolicy&) -> std::string { return "opt"; },
                        [](const LfuAgedPolicy& p) -> std::string {
                          char buf[64];
                          auto [end, ec] = std::to_chars(buf, buf + sizeof buf, p.decay_factor);
                          return "lfu-aged:" + std::string(buf, end) + ":" +
                                 std::to_string(p.decay_period);
                        },
                    },
                    kind);
}

void validate(const PolicyKind& kind) {
  if (const auto* p = std::get_if<LfuAgedPolicy>(&kind)) {
    if (!(p->decay_factor > 0.0 && p->decay_factor <= 1.0)) {
      throw ConfigError("lfu-aged decay factor must be in (0, 1]");
    }
    if (p->decay_period < 1) throw ConfigError("lfu-aged decay period must be positive");
  }
}

bool needs_future(const PolicyKind& kind) { return std::holds_alternative<OptPolicy>(kind); }

ExpertSet CacheState::resident() const { return ExpertSet(recency); }

double CacheState::frequency(ExpertId id) const {
  auto it = freq.find(id);
  return it == freq.end() ? 0.0 : it->second;
}

CacheState warm_state(const PolicyKind& kind, int capacity) {
  validate(kind);
  if (capacity < 1) throw ConfigError("cache capacity must be at least 1");
  CacheState s;
  s.capacity = capacity;
  return s;
}

StepOutcome apply_step(CacheState& state, const PolicyKind& kind, const ExpertSet& activated,
                       std::optional<std::span<const ExpertSet>> future) {
  if (static_cast<int>(activated.size()) > state.capacity) {
    throw ConfigError("activated set of " + std::to_string(activated.size()) +
                      " experts does not fit a cache of " + std::to_string(state.capacity));
  }
  if (needs_future(kind) != future.has_value()) {
    throw ConfigError(needs_future(kind) ? "opt policy requires the future activation stream"
                                         : "future activations are only accepted by opt");
  }

  if (const auto* aged = std::get_if<LfuAgedPolicy>(&kind)) {
    if (state.step > 0 && state.step % aged->decay_period == 0) {
      for (auto& [id, count] : state.freq) count *= aged->decay_factor;
    }
  }

  StepOutcome out;
  out.resident_before = state.resident();
  for (ExpertId id : activated) {
    if (out.resident_before.contains(id)) {
      out.hits.insert(id);
    } else {
      out.misses.insert(id);
    }
  }
  out.loaded = out.misses;

  const int overflow =
      static_cast<int>(out.resident_before.size() + out.misses.size()) - state.capacity;
  std::vector<ExpertId> candidates;
  for (ExpertId id : state.recency) {
    if (!activated.contains(id)) candidates.push_back(id);
  }
  for (int i = 0; i < overflow; ++i) {
    const ExpertId victim = choose_victim(state, kind, candidates, future);
    candidates.erase(std::find(candidates.begin(), candidates.end(), victim));
    state.recency.erase(std::find(state.recency.begin(), state.recency.end(), victim));
    out.evicted.insert(victim);
  }

  // Refresh recency: this step's experts move to the front, the higher id
  // first so that the lower id is treated as the older of the group.
  std::vector<ExpertId> recency;
  recency.reserve(static_cast<std::size_t>(state.capacity));
  for (auto it = activated.ids().rbegin(); it != activated.ids().rend(); ++it) {
    recency.push_back(*it);
  }
  for (ExpertId id : state.recency) {
    if (!activated.contains(id)) recency.push_back(id);
  }
  state.recency = std::move(recency);

  for (ExpertId id : activated) state.freq[id] += 1.0;
  ++state.step;
  out.resident_after = state.resident();
  return out;
}

PolicyStepResult policy_step(const CacheState& state, const PolicyKind& kind,
                             const ExpertSet& activated,
                             std::optional<std::span<const ExpertSet>> future) {
  PolicyStepResult r{state, {}};
  r.outcome = apply_step(r.state, kind, activated, future);
  return r;
}

}  // namespace moecache
