// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "moecache/cost_model.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "moecache/error.hpp"

namespace moecache {

using nlohmann::ordered_json;

void CostParams::validate() const {
  if (expert_bytes == 0) throw ConfigError("expert_bytes must be positive");
  if (!(bandwidth_bytes_per_s > 0.0) || !std::isfinite(bandwidth_bytes_per_s)) {
    throw ConfigError("bandwidth must be positive and finite");
  }
  if (!(compute_s_per_layer >= 0.0) || !std::isfinite(compute_s_per_layer)) {
    throw ConfigError("compute time per layer must be non-negative");
  }
  if (!(overlap >= 0.0 && overlap <= 1.0)) throw ConfigError("overlap must be in [0, 1]");
}

LatencyEstimate estimate_latency(const CacheEventLog& log, const CostParams& params) {
  params.validate();
  const double transfer_s =
      (1.0 - params.overlap) * static_cast<double>(params.expert_bytes) / params.bandwidth_bytes_per_s;
  LatencyEstimate e;
  for (const auto& s : log.steps) {
    const auto misses = static_cast<long>(s.outcome.misses.size());
    e.total_misses += misses;
    e.total_seconds += params.compute_s_per_layer + static_cast<double>(misses) * transfer_s;
  }
  e.bytes_transferred = static_cast<std::uint64_t>(e.total_misses) * params.expert_bytes;
  if (log.num_tokens > 0) {
    e.seconds_per_token = e.total_seconds / log.num_tokens;
    if (e.total_seconds > 0.0) e.tokens_per_second = log.num_tokens / e.total_seconds;
  }
  return e;
}

SpeculationCost speculation_cost(const SpeculationTrace& trace, const CostParams& params) {
  params.validate();
  SpeculationCost c;
  for (const auto& r : trace.records()) {
    const auto correct = static_cast<long>(intersection_size(r.guessed, r.actual));
    const auto wrong = static_cast<long>(r.guessed.size()) - correct;
    const auto corrective = static_cast<long>(r.actual.size()) - correct;
    c.transferred_experts += static_cast<long>(r.guessed.size()) + corrective;
    c.wasted_experts += wrong;
  }
  c.bytes_transferred = static_cast<std::uint64_t>(c.transferred_experts) * params.expert_bytes;
  c.wasted_bytes = static_cast<std::uint64_t>(c.wasted_experts) * params.expert_bytes;
  return c;
}

MemoryModel fit_memory_model(std::span<const MemoryPoint> points) {
  if (points.size() < 2) throw FitError("memory fit needs at least two points");
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (const auto& p : points) {
    mean_x += p.offloads;
    mean_y += p.peak_mb;
  }
  mean_x /= static_cast<double>(points.size());
  mean_y /= static_cast<double>(points.size());
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& p : points) {
    sxx += (p.offloads - mean_x) * (p.offloads - mean_x);
    sxy += (p.offloads - mean_x) * (p.peak_mb - mean_y);
  }
  if (sxx == 0.0) throw FitError("memory fit needs at least two distinct offload values");

  MemoryModel m;
  m.slope_mb_per_offload = sxy / sxx;
  m.intercept_mb = mean_y - m.slope_mb_per_offload * mean_x;
  for (const auto& p : points) m.residuals.push_back(p.peak_mb - estimate_peak_memory(m, p.offloads));
  return m;
}

double estimate_peak_memory(const MemoryModel& model, double offloads) {
  return model.intercept_mb + model.slope_mb_per_offload * offloads;
}

std::vector<MemoryPoint> parse_memory_points(std::string_view text) {
  auto parse_number = [&](std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError("bad number \"" + std::string(s) + "\" in memory points");
    }
    return v;
  };
  std::vector<MemoryPoint> points;
  while (!text.empty()) {
    const auto comma = text.find(',');
    if (comma + 1 == text.size()) throw ConfigError("trailing comma in memory points");
    const auto item = text.substr(0, comma);
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) {
      throw ConfigError("memory point \"" + std::string(item) + "\" is not offloads:peak_mb");
    }
    points.push_back({parse_number(item.substr(0, colon)), parse_number(item.substr(colon + 1))});
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
  }
  return points;
}

std::vector<MemoryPoint> mixtral_offload_memory_points() {
  return {{4, 11148.3}, {5, 9145.8}, {6, 7127.7}};
}

ordered_json to_json(const LatencyEstimate& e) {
  ordered_json j;
  j["seconds_per_token"] = e.seconds_per_token;
  j["tokens_per_second"] = e.tokens_per_second;
  j["total_seconds"] = e.total_seconds;
  j["total_misses"] = e.total_misses;
  j["bytes_transferred"] = e.bytes_transferred;
  return j;
}

ordered_json to_json(const SpeculationCost& c) {
  ordered_json j;
  j["transferred_experts"] = c.transferred_experts;
  j["wasted_experts"] = c.wasted_experts;
  j["bytes_transferred"] = c.bytes_transferred;
  j["wasted_bytes"] = c.wasted_bytes;
  return j;
}

ordered_json to_json(const MemoryModel& m) {
  ordered_json j;
  j["intercept_mb"] = m.intercept_mb;
  j["slope_mb_per_offload"] = m.slope_mb_per_offload;
  j["residuals"] = m.residuals;
  return j;
}

}  // namespace moecache
