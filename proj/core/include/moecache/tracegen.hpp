// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "moecache/trace.hpp"

namespace moecache {

/// Rank-based Zipf popularity: the expert at rank r (1-based) has weight r^-s.
struct ZipfParams {
  ModelShape shape;
  int num_tokens = 512;
  double skew_exponent = 1.0;
  /// Give every layer its own popularity ranking; otherwise all layers share one.
  bool per_layer_permutation = true;
  std::uint64_t seed = 42;

  void validate() const;
};

/// Temporal locality on top of Zipf: each expert of the previous token is
/// kept with probability `repeat_prob`, the rest are drawn from `base`.
struct MarkovParams {
  ZipfParams base;
  double repeat_prob = 0.3;

  void validate() const;
};

/// Synthetic speculation: uniform random actual sets; each actual expert is
/// guessed with probability `keep_prob`, remaining guesses are uniform misses
/// or lucky re-picks.
struct SpeculationNoiseParams {
  ModelShape shape;
  int num_tokens = 64;
  double keep_prob = 0.8;
  std::uint64_t seed = 42;

  void validate() const;
};

ActivationTrace gen_zipf(const ZipfParams& params);
ActivationTrace gen_markov(const MarkovParams& params);
SpeculationTrace gen_speculation(const SpeculationNoiseParams& params);

/// Per-layer expert weights: weights[layer][expert].
std::vector<std::vector<double>> zipf_layer_weights(const ZipfParams& params, std::mt19937_64& rng);

/// Sequential weighted draws without replacement: each draw picks among the
/// experts not yet in `chosen` with probability proportional to weight.
/// Appends until `chosen` has `k` members.
void draw_without_replacement(std::span<const double> weights, int k, ExpertSet& chosen,
                              std::mt19937_64& rng);

}  // namespace moecache
