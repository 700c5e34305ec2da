// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "moecache/metrics.hpp"

#include <algorithm>
#include <map>

namespace moecache {

using nlohmann::ordered_json;

std::optional<double> Ratio::value() const {
  if (!defined()) return std::nullopt;
  return numerator / denominator;
}

double CacheCounts::hit_rate() const noexcept {
  const long n = hits + misses;
  return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
}

namespace {

void accumulate(CacheCounts& c, const SimStep& s) {
  ++c.steps;
  c.hits += static_cast<long>(s.outcome.hits.size());
  c.misses += static_cast<long>(s.outcome.misses.size());
  c.cached_total += static_cast<long>(s.outcome.resident_before.size());
  c.activated_total += static_cast<long>(s.outcome.hits.size() + s.outcome.misses.size());
}

void accumulate(SpeculationCounts& c, const SpeculationRecord& r) {
  ++c.records;
  const auto tp = static_cast<long>(intersection_size(r.guessed, r.actual));
  c.tp += tp;
  c.fp += static_cast<long>(r.guessed.size()) - tp;
  c.fn += static_cast<long>(r.actual.size()) - tp;
}

ordered_json counts_json(const CacheCounts& c) {
  ordered_json j;
  j["hit_rate"] = c.hit_rate();
  j["precision"] = to_json(c.precision());
  j["recall"] = to_json(c.recall());
  j["hits"] = c.hits;
  j["misses"] = c.misses;
  j["cached_total"] = c.cached_total;
  j["activated_total"] = c.activated_total;
  j["steps"] = c.steps;
  j["empty"] = c.empty();
  return j;
}

ordered_json counts_json(const SpeculationCounts& c) {
  ordered_json j;
  j["precision"] = to_json(c.precision());
  j["recall"] = to_json(c.recall());
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["fn"] = c.fn;
  j["records"] = c.records;
  j["empty"] = c.records == 0;
  return j;
}

}  // namespace

CacheMetrics cache_metrics(const CacheEventLog& log, const CacheMetricsOptions& options) {
  const int warmup = options.warmup_tokens.value_or(log.config.warmup_tokens);
  CacheMetrics m;
  std::map<int, CacheCounts> layers;
  for (int l : log.layers()) layers[l];
  for (const auto& s : log.steps) {
    if (s.token < warmup) continue;
    if (options.full_cache_only &&
        static_cast<int>(s.outcome.resident_before.size()) != log.config.cache_size) {
      continue;
    }
    accumulate(m.total, s);
    accumulate(layers[s.layer], s);
  }
  for (const auto& [layer, counts] : layers) m.per_layer.push_back({layer, counts});
  return m;
}

SpeculationMetrics speculation_metrics(const SpeculationTrace& trace) {
  SpeculationMetrics m;
  std::map<int, SpeculationCounts> layers;
  for (int l = 1; l < trace.shape().num_layers; ++l) layers[l];
  for (const auto& r : trace.records()) {
    accumulate(m.total, r);
    accumulate(layers[r.layer], r);
  }
  for (const auto& [layer, counts] : layers) m.per_layer.push_back({layer, counts});
  return m;
}

double gini(std::span<const long> counts) {
  std::vector<long> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  double total = 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double rank = static_cast<double>(i + 1);
    total += static_cast<double>(sorted[i]);
    weighted += (2.0 * rank - n - 1.0) * static_cast<double>(sorted[i]);
  }
  return total == 0.0 ? 0.0 : weighted / (n * total);
}

std::vector<ExpertHistogram> expert_histograms(const ActivationTrace& trace) {
  const ModelShape& shape = trace.shape();
  std::vector<ExpertHistogram> out(static_cast<std::size_t>(shape.num_layers));
  for (int l = 0; l < shape.num_layers; ++l) {
    out[static_cast<std::size_t>(l)].layer = l;
    out[static_cast<std::size_t>(l)].counts.assign(static_cast<std::size_t>(shape.num_experts), 0);
  }
  for (const auto& r : trace.records()) {
    auto& counts = out[static_cast<std::size_t>(r.layer)].counts;
    for (ExpertId e : r.activated) ++counts[static_cast<std::size_t>(e)];
  }
  for (auto& h : out) {
    h.gini = gini(h.counts);
    h.min_count = *std::min_element(h.counts.begin(), h.counts.end());
    h.max_count = *std::max_element(h.counts.begin(), h.counts.end());
  }
  return out;
}

Ratio repeat_rate(const ActivationTrace& trace) {
  Ratio r;
  const ModelShape& shape = trace.shape();
  for (int t = 1; t < trace.num_tokens(); ++t) {
    for (int l = 0; l < shape.num_layers; ++l) {
      const auto& prev = trace.activated(t - 1, l);
      r.numerator += static_cast<double>(intersection_size(prev, trace.activated(t, l)));
      r.denominator += static_cast<double>(prev.size());
    }
  }
  return r;
}

ordered_json to_json(const Ratio& r) {
  if (auto v = r.value()) return *v;
  return nullptr;
}

ordered_json to_json(const CacheMetrics& m) {
  ordered_json j = counts_json(m.total);
  ordered_json layers = ordered_json::array();
  for (const auto& l : m.per_layer) {
    ordered_json lj;
    lj["layer"] = l.layer;
    lj.update(counts_json(l.counts));
    layers.push_back(std::move(lj));
  }
  j["per_layer"] = std::move(layers);
  return j;
}

ordered_json to_json(const SpeculationMetrics& m) {
  ordered_json j = counts_json(m.total);
  ordered_json layers = ordered_json::array();
  for (const auto& l : m.per_layer) {
    ordered_json lj;
    lj["layer"] = l.layer;
    lj.update(counts_json(l.counts));
    layers.push_back(std::move(lj));
  }
  j["per_layer"] = std::move(layers);
  return j;
}

ordered_json to_json(const ExpertHistogram& h) {
  ordered_json j;
  j["layer"] = h.layer;
  j["counts"] = h.counts;
  j["gini"] = h.gini;
  j["min_count"] = h.min_count;
  j["max_count"] = h.max_count;
  return j;
}

}  // namespace moecache
