// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "moecache/expert_set.hpp"

namespace moecache {

/// Dimensions of the MoE stack. Defaults are Mixtral 8x7B: 32 layers, 8 experts, top-2.
struct ModelShape {
  int num_layers = 32;
  int num_experts = 8;
  int top_k = 2;

  /// Throws ConfigError unless all fields are positive and top_k <= num_experts.
  void validate() const;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

struct ActivationRecord {
  int token = 0;
  int layer = 0;
  ExpertSet activated;

  friend bool operator==(const ActivationRecord&, const ActivationRecord&) = default;
};

/// Ground-truth expert selections, one record per (token, layer).
///
/// Immutable once constructed. Records are kept sorted by (token, layer) so the
/// record for (t, l) lives at index t * num_layers + l.
class ActivationTrace {
 public:
  explicit ActivationTrace(ModelShape shape);

  /// Sorts `records` by (token, layer) and validates every invariant; throws
  /// ValidationError on the first violation.
  ActivationTrace(ModelShape shape, std::vector<ActivationRecord> records);

  const ModelShape& shape() const noexcept { return shape_; }
  std::span<const ActivationRecord> records() const noexcept { return records_; }
  int num_tokens() const noexcept;
  bool empty() const noexcept { return records_.empty(); }

  const ExpertSet& activated(int token, int layer) const;

  /// Activated sets of one layer in token order.
  std::vector<ExpertSet> layer_stream(int layer) const;

  friend bool operator==(const ActivationTrace&, const ActivationTrace&) = default;

 private:
  ModelShape shape_;
  std::vector<ActivationRecord> records_;
};

/// A guess for layer `layer` made from layer `layer - 1`'s output. layer >= 1.
struct SpeculationRecord {
  int token = 0;
  int layer = 1;
  ExpertSet guessed;
  ExpertSet actual;

  friend bool operator==(const SpeculationRecord&, const SpeculationRecord&) = default;
};

/// Speculative guesses aligned with true activations for layers 1..L-1.
/// Layer 0 has no predecessor and therefore no records.
class SpeculationTrace {
 public:
  explicit SpeculationTrace(ModelShape shape);
  SpeculationTrace(ModelShape shape, std::vector<SpeculationRecord> records);

  const ModelShape& shape() const noexcept { return shape_; }
  std::span<const SpeculationRecord> records() const noexcept { return records_; }
  int num_tokens() const noexcept;
  bool empty() const noexcept { return records_.empty(); }

  /// Throws SelectionError if the pair is not present.
  const SpeculationRecord& at(int token, int layer) const;

  friend bool operator==(const SpeculationTrace&, const SpeculationTrace&) = default;

 private:
  ModelShape shape_;
  std::vector<SpeculationRecord> records_;
};

}  // namespace moecache
