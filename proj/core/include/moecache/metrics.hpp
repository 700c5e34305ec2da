// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "moecache/cache_sim.hpp"
#include "moecache/trace.hpp"

namespace moecache {

/// numerator / denominator, undefined when the denominator is zero.
struct Ratio {
  double numerator = 0.0;
  double denominator = 0.0;

  bool defined() const noexcept { return denominator != 0.0; }
  std::optional<double> value() const;
};

struct CacheCounts {
  long steps = 0;
  long hits = 0;
  long misses = 0;
  /// Σ|S_t|: resident experts before each step.
  long cached_total = 0;
  /// Σ|A_t|: activated experts.
  long activated_total = 0;

  /// hits / (hits + misses), 0 when nothing was counted.
  double hit_rate() const noexcept;
  Ratio precision() const noexcept { return {double(hits), double(cached_total)}; }
  Ratio recall() const noexcept { return {double(hits), double(activated_total)}; }
  bool empty() const noexcept { return hits + misses == 0; }
};

struct LayerCacheMetrics {
  int layer = 0;
  CacheCounts counts;
};

struct CacheMetrics {
  CacheCounts total;
  std::vector<LayerCacheMetrics> per_layer;
};

struct CacheMetricsOptions {
  /// Overrides the log's own warmup_tokens.
  std::optional<int> warmup_tokens;
  /// Only count steps whose cache was full beforehand (|S_t| = C).
  bool full_cache_only = false;
};

CacheMetrics cache_metrics(const CacheEventLog& log, const CacheMetricsOptions& options = {});

struct SpeculationCounts {
  long records = 0;
  long tp = 0;
  long fp = 0;
  long fn = 0;

  Ratio precision() const noexcept { return {double(tp), double(tp + fp)}; }
  Ratio recall() const noexcept { return {double(tp), double(tp + fn)}; }
};

struct LayerSpeculationMetrics {
  int layer = 0;
  SpeculationCounts counts;
};

struct SpeculationMetrics {
  SpeculationCounts total;
  std::vector<LayerSpeculationMetrics> per_layer;
};

SpeculationMetrics speculation_metrics(const SpeculationTrace& trace);

struct ExpertHistogram {
  int layer = 0;
  std::vector<long> counts;
  double gini = 0.0;
  long min_count = 0;
  long max_count = 0;
};

/// Σ(2i − n − 1)·c_i / (n·Σc) over ascending counts, i = 1..n; 0 for all-zero input.
double gini(std::span<const long> counts);

std::vector<ExpertHistogram> expert_histograms(const ActivationTrace& trace);

/// Fraction of each token's experts that the next token selects again,
/// pooled over layers.
Ratio repeat_rate(const ActivationTrace& trace);

nlohmann::ordered_json to_json(const Ratio& r);
nlohmann::ordered_json to_json(const CacheMetrics& m);
nlohmann::ordered_json to_json(const SpeculationMetrics& m);
nlohmann::ordered_json to_json(const ExpertHistogram& h);

}  // namespace moecache
