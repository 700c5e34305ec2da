// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

// Reference implementations used only by tests. None of these call into the
// code they check beyond plain data accessors.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "moecache/cache_sim.hpp"
#include "moecache/toy_moe.hpp"
#include "moecache/trace.hpp"

namespace moecache::oracle {

using Stream = std::vector<std::vector<int>>;

struct RefStep {
  std::vector<int> cached;
  std::vector<int> hit;
  std::vector<int> miss;
  std::vector<int> evict;

  friend bool operator==(const RefStep&, const RefStep&) = default;
};

enum class RefPolicy { Lru, Lfu, Opt };

/// Straight-line replay of one layer's activation stream.
std::vector<RefStep> replay(const Stream& stream, int capacity, RefPolicy policy);

/// The same four sets pulled out of a library event log, one layer.
std::vector<RefStep> steps_of(const CacheEventLog& log, int layer);

Stream layer_stream(const ActivationTrace& trace, int layer);

/// P(expert i is among k sequential weighted draws without replacement),
/// by enumerating every ordered draw sequence.
std::vector<double> inclusion_probabilities(const std::vector<double>& weights, int k);

/// Σ_i Σ_j |c_i − c_j| / (2·n·Σc).
double pairwise_gini(const std::vector<long>& counts);

/// Plain-loop softmax of hᵀW + b.
std::vector<double> softmax_logits(const std::vector<double>& h, const GatingNetwork& gate);

struct RefLayerOut {
  std::vector<double> h_out;
  std::vector<int> activated;  // sorted
};

/// One layer of the toy model with scalar loops over the layer's weights.
RefLayerOut forward(const ToyLayer& layer, double alpha, int k, const std::vector<double>& h_in);

ActivationTrace random_activation_trace(const ModelShape& shape, int tokens, std::mt19937_64& rng);
SpeculationTrace random_speculation_trace(const ModelShape& shape, int tokens,
                                          std::mt19937_64& rng);
ModelShape random_shape(std::mt19937_64& rng, int max_layers, int max_experts, int max_k);

/// Counts <rect> elements per class attribute. Throws if `svg` is not well-formed XML.
std::map<std::string, int> count_rect_classes(const std::string& svg);
/// Every attribute in the document as (name, value), in document order.
std::vector<std::pair<std::string, std::string>> attributes(const std::string& svg);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);

}  // namespace moecache::oracle
