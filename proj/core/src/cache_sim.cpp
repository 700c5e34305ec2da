// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "moecache/cache_sim.hpp"

#include <algorithm>
#include <string>

#include "moecache/error.hpp"

namespace moecache {

ExpertSet SimStep::activated() const { return set_union(outcome.hits, outcome.misses); }

std::vector<int> CacheEventLog::layers() const {
  if (config.layers) {
    auto out = *config.layers;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  std::vector<int> out(static_cast<std::size_t>(shape.num_layers));
  for (int l = 0; l < shape.num_layers; ++l) out[static_cast<std::size_t>(l)] = l;
  return out;
}

bool CacheEventLog::has_layer(int layer) const {
  const auto ls = layers();
  return std::binary_search(ls.begin(), ls.end(), layer);
}

std::vector<SimStep> CacheEventLog::layer_steps(int layer) const {
  std::vector<SimStep> out;
  for (const auto& s : steps) {
    if (s.layer == layer) out.push_back(s);
  }
  return out;
}

CacheEventLog simulate(const ActivationTrace& trace, const SimConfig& config) {
  const ModelShape& shape = trace.shape();
  validate(config.policy);
  if (config.cache_size < 1) throw ConfigError("cache size must be at least 1");
  if (shape.top_k > config.cache_size) {
    throw ConfigError("top_k=" + std::to_string(shape.top_k) + " exceeds cache size " +
                      std::to_string(config.cache_size));
  }
  if (config.warmup_tokens < 0) throw ConfigError("warmup_tokens must be non-negative");
  if (config.layers) {
    for (int l : *config.layers) {
      if (l < 0 || l >= shape.num_layers) {
        throw ConfigError("layer " + std::to_string(l) + " out of range for num_layers=" +
                          std::to_string(shape.num_layers));
      }
    }
  }

  CacheEventLog log;
  log.shape = shape;
  log.config = config;
  if (log.config.layers) {
    // Canonical form: sorted, unique, unset when every layer is selected.
    log.config.layers = log.layers();
    if (static_cast<int>(log.config.layers->size()) == shape.num_layers) {
      log.config.layers.reset();
    }
  }
  log.num_tokens = trace.num_tokens();
  const auto layers = log.layers();
  const auto num_tokens = static_cast<std::size_t>(trace.num_tokens());

  // Layers are independent caches; run each to completion, then interleave
  // into (token, layer) order.
  std::vector<std::vector<StepOutcome>> per_layer;
  per_layer.reserve(layers.size());
  for (int layer : layers) {
    const auto stream = trace.layer_stream(layer);
    CacheState state = warm_state(config.policy, config.cache_size);
    std::vector<StepOutcome> outcomes;
    outcomes.reserve(num_tokens);
    for (std::size_t t = 0; t < num_tokens; ++t) {
      std::optional<std::span<const ExpertSet>> future;
      if (needs_future(config.policy)) future = std::span(stream).subspan(t + 1);
      outcomes.push_back(apply_step(state, config.policy, stream[t], future));
    }
    per_layer.push_back(std::move(outcomes));
  }

  log.steps.reserve(num_tokens * layers.size());
  for (std::size_t t = 0; t < num_tokens; ++t) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      log.steps.push_back({static_cast<int>(t), layers[i], std::move(per_layer[i][t])});
    }
  }
  return log;
}

int offloads_to_cache_size(int offloads, const ModelShape& shape) {
  if (offloads < 0 || offloads >= shape.num_experts) {
    throw ConfigError("offloads per layer must be in [0, " + std::to_string(shape.num_experts) +
                      "), got " + std::to_string(offloads));
  }
  return shape.num_experts - offloads;
}

}  // namespace moecache
