// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "moecache/cache_sim.hpp"
#include "moecache/trace.hpp"

namespace moecache {

struct CostParams {
  /// One 2-bit quantized Mixtral expert: ~2000 MB per extra offload spread over 32 layers.
  std::uint64_t expert_bytes = 65'536'000;
  double bandwidth_bytes_per_s = 12e9;
  double compute_s_per_layer = 0.001;
  /// Fraction of transfer time hidden behind compute, in [0, 1].
  double overlap = 0.0;

  void validate() const;
};

struct LatencyEstimate {
  double total_seconds = 0.0;
  double seconds_per_token = 0.0;
  double tokens_per_second = 0.0;
  long total_misses = 0;
  std::uint64_t bytes_transferred = 0;
};

/// Per token: Σ over simulated layers of compute + (1 − overlap)·misses·expert_bytes/bandwidth.
/// Every step of the log counts, warmup included.
LatencyEstimate estimate_latency(const CacheEventLog& log, const CostParams& params);

struct SpeculationCost {
  long transferred_experts = 0;
  long wasted_experts = 0;
  std::uint64_t bytes_transferred = 0;
  std::uint64_t wasted_bytes = 0;
};

/// Transfer volume if every guess were prefetched and every wrong guess
/// corrected at the next layer. Cache effects are not modelled.
SpeculationCost speculation_cost(const SpeculationTrace& trace, const CostParams& params);

struct MemoryPoint {
  double offloads = 0.0;
  double peak_mb = 0.0;
};

/// peak_mb ≈ intercept_mb + slope_mb_per_offload · offloads.
struct MemoryModel {
  double intercept_mb = 0.0;
  double slope_mb_per_offload = 0.0;
  std::vector<double> residuals;
};

/// Ordinary least squares. Throws FitError with fewer than two distinct offload values.
MemoryModel fit_memory_model(std::span<const MemoryPoint> points);
double estimate_peak_memory(const MemoryModel& model, double offloads);

/// Parses "4:11148.3,5:9145.8". Throws ConfigError on malformed text.
std::vector<MemoryPoint> parse_memory_points(std::string_view text);

/// Peak memory of Mixtral 8x7B (HQQ 2-bit experts, A6000) at 4, 5 and 6 offloads per layer.
std::vector<MemoryPoint> mixtral_offload_memory_points();

nlohmann::ordered_json to_json(const LatencyEstimate& e);
nlohmann::ordered_json to_json(const SpeculationCost& c);
nlohmann::ordered_json to_json(const MemoryModel& m);

}  // namespace moecache
