// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "moecache/tracegen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "moecache/error.hpp"

namespace moecache {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

void ZipfParams::validate() const {
  shape.validate();
  if (num_tokens < 0) throw ConfigError("num_tokens must be non-negative");
  if (!(skew_exponent >= 0.0) || !std::isfinite(skew_exponent)) {
    throw ConfigError("skew exponent must be finite and non-negative");
  }
}

void MarkovParams::validate() const {
  base.validate();
  if (!(repeat_prob >= 0.0 && repeat_prob <= 1.0)) {
    throw ConfigError("repeat probability must be in [0, 1]");
  }
}

void SpeculationNoiseParams::validate() const {
  shape.validate();
  if (num_tokens < 0) throw ConfigError("num_tokens must be non-negative");
  if (!(keep_prob >= 0.0 && keep_prob <= 1.0)) throw ConfigError("keep_prob must be in [0, 1]");
}

std::vector<std::vector<double>> zipf_layer_weights(const ZipfParams& params,
                                                    std::mt19937_64& rng) {
  const int num_experts = params.shape.num_experts;
  std::vector<int> ranking(static_cast<std::size_t>(num_experts));
  std::iota(ranking.begin(), ranking.end(), 0);
  if (!params.per_layer_permutation) std::shuffle(ranking.begin(), ranking.end(), rng);

  std::vector<std::vector<double>> weights;
  for (int l = 0; l < params.shape.num_layers; ++l) {
    if (params.per_layer_permutation) std::shuffle(ranking.begin(), ranking.end(), rng);
    // ranking[r] is the expert holding rank r + 1.
    std::vector<double> w(static_cast<std::size_t>(num_experts));
    for (int r = 0; r < num_experts; ++r) {
      w[static_cast<std::size_t>(ranking[static_cast<std::size_t>(r)])] =
          std::pow(static_cast<double>(r + 1), -params.skew_exponent);
    }
    weights.push_back(std::move(w));
  }
  return weights;
}

void draw_without_replacement(std::span<const double> weights, int k, ExpertSet& chosen,
                              std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<int>(chosen.size()) < k) {
    double total = 0.0;
    for (std::size_t e = 0; e < weights.size(); ++e) {
      if (!chosen.contains(static_cast<ExpertId>(e))) total += weights[e];
    }
    const double target = unit(rng) * total;
    double acc = 0.0;
    ExpertId pick = -1;
    for (std::size_t e = 0; e < weights.size(); ++e) {
      if (chosen.contains(static_cast<ExpertId>(e))) continue;
      pick = static_cast<ExpertId>(e);  // last eligible absorbs rounding
      acc += weights[e];
      if (target < acc) break;
    }
    if (pick < 0) throw ConfigError("cannot draw more experts than exist");
    chosen.insert(pick);
  }
}

ActivationTrace gen_zipf(const ZipfParams& params) {
  params.validate();
  auto rng = make_rng(params.seed);
  const auto weights = zipf_layer_weights(params, rng);
  std::vector<ActivationRecord> records;
  records.reserve(static_cast<std::size_t>(params.num_tokens) *
                  static_cast<std::size_t>(params.shape.num_layers));
  for (int t = 0; t < params.num_tokens; ++t) {
    for (int l = 0; l < params.shape.num_layers; ++l) {
      ExpertSet set;
      draw_without_replacement(weights[static_cast<std::size_t>(l)], params.shape.top_k, set, rng);
      records.push_back({t, l, std::move(set)});
    }
  }
  return ActivationTrace(params.shape, std::move(records));
}

ActivationTrace gen_markov(const MarkovParams& params) {
  params.validate();
  const ZipfParams& base = params.base;
  auto rng = make_rng(base.seed);
  const auto weights = zipf_layer_weights(base, rng);
  std::bernoulli_distribution keep(params.repeat_prob);

  const auto num_layers = static_cast<std::size_t>(base.shape.num_layers);
  std::vector<ExpertSet> previous(num_layers);
  std::vector<ActivationRecord> records;
  records.reserve(static_cast<std::size_t>(base.num_tokens) * num_layers);
  for (int t = 0; t < base.num_tokens; ++t) {
    for (std::size_t l = 0; l < num_layers; ++l) {
      ExpertSet set;
      if (t > 0) {
        for (ExpertId e : previous[l]) {
          if (keep(rng)) set.insert(e);
        }
      }
      draw_without_replacement(weights[l], base.shape.top_k, set, rng);
      previous[l] = set;
      records.push_back({t, static_cast<int>(l), std::move(set)});
    }
  }
  return ActivationTrace(base.shape, std::move(records));
}

SpeculationTrace gen_speculation(const SpeculationNoiseParams& params) {
  params.validate();
  auto rng = make_rng(params.seed);
  const std::vector<double> uniform(static_cast<std::size_t>(params.shape.num_experts), 1.0);
  std::bernoulli_distribution keep(params.keep_prob);
  std::vector<SpeculationRecord> records;
  for (int t = 0; t < params.num_tokens; ++t) {
    for (int l = 1; l < params.shape.num_layers; ++l) {
      ExpertSet actual;
      draw_without_replacement(uniform, params.shape.top_k, actual, rng);
      ExpertSet guessed;
      for (ExpertId e : actual) {
        if (keep(rng)) guessed.insert(e);
      }
      draw_without_replacement(uniform, params.shape.top_k, guessed, rng);
      records.push_back({t, l, std::move(guessed), std::move(actual)});
    }
  }
  return SpeculationTrace(params.shape, std::move(records));
}

}  // namespace moecache
