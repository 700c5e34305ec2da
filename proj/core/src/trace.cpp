// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "moecache/trace.hpp"

#include <algorithm>
#include <string>
#include <tuple>

#include "moecache/error.hpp"

namespace moecache {

void ModelShape::validate() const {
  if (num_layers < 1) throw ConfigError("num_layers must be positive");
  if (num_experts < 1) throw ConfigError("num_experts must be positive");
  if (top_k < 1 || top_k > num_experts) {
    throw ConfigError("top_k must be in [1, num_experts], got " + std::to_string(top_k));
  }
}

namespace {

std::string where(int token, int layer) {
  return "(token " + std::to_string(token) + ", layer " + std::to_string(layer) + ")";
}

void check_shape(const ModelShape& shape) {
  try {
    shape.validate();
  } catch (const ConfigError& e) {
    throw ValidationError(e.what());
  }
}

void check_set(const ModelShape& shape, const ExpertSet& set, const char* what, int token,
               int layer) {
  if (static_cast<int>(set.size()) != shape.top_k) {
    throw ValidationError(std::string(what) + " set at " + where(token, layer) + " has " +
                          std::to_string(set.size()) + " experts, expected top_k=" +
                          std::to_string(shape.top_k));
  }
  if (!set.empty() && set.max() >= shape.num_experts) {
    throw ValidationError("expert " + std::to_string(set.max()) + " at " + where(token, layer) +
                          " out of range for num_experts=" + std::to_string(shape.num_experts));
  }
}

// Records must already be sorted by (token, layer). Layers run over
// [first_layer, num_layers) and tokens are contiguous from 0.
template <typename Record>
void check_grid(const std::vector<Record>& records, int first_layer, int num_layers) {
  const int per_token = num_layers - first_layer;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i > 0 && records[i - 1].token == r.token && records[i - 1].layer == r.layer) {
      throw ValidationError("duplicate record at " + where(r.token, r.layer));
    }
    const int want_token = static_cast<int>(i) / per_token;
    const int want_layer = first_layer + static_cast<int>(i) % per_token;
    if (r.token != want_token || r.layer != want_layer) {
      throw ValidationError("missing record at " + where(want_token, want_layer));
    }
  }
  if (!records.empty() && records.back().layer != num_layers - 1) {
    throw ValidationError("missing record at " +
                          where(records.back().token, records.back().layer + 1));
  }
}

template <typename Record>
void sort_records(std::vector<Record>& records) {
  std::stable_sort(records.begin(), records.end(), [](const Record& a, const Record& b) {
    return std::tie(a.token, a.layer) < std::tie(b.token, b.layer);
  });
}

}  // namespace

ActivationTrace::ActivationTrace(ModelShape shape) : shape_(shape) { check_shape(shape_); }

ActivationTrace::ActivationTrace(ModelShape shape, std::vector<ActivationRecord> records)
    : shape_(shape), records_(std::move(records)) {
  check_shape(shape_);
  for (const auto& r : records_) {
    if (r.token < 0) throw ValidationError("negative token index " + std::to_string(r.token));
    if (r.layer < 0 || r.layer >= shape_.num_layers) {
      throw ValidationError("layer " + std::to_string(r.layer) + " out of range for num_layers=" +
                            std::to_string(shape_.num_layers));
    }
    check_set(shape_, r.activated, "activated", r.token, r.layer);
  }
  sort_records(records_);
  check_grid(records_, 0, shape_.num_layers);
}

int ActivationTrace::num_tokens() const noexcept {
  return static_cast<int>(records_.size()) / shape_.num_layers;
}

const ExpertSet& ActivationTrace::activated(int token, int layer) const {
  if (token < 0 || token >= num_tokens() || layer < 0 || layer >= shape_.num_layers) {
    throw SelectionError("no activation record at " + where(token, layer));
  }
  return records_[static_cast<std::size_t>(token) * shape_.num_layers + layer].activated;
}

std::vector<ExpertSet> ActivationTrace::layer_stream(int layer) const {
  if (layer < 0 || layer >= shape_.num_layers) {
    throw SelectionError("layer " + std::to_string(layer) + " out of range");
  }
  std::vector<ExpertSet> out;
  out.reserve(static_cast<std::size_t>(num_tokens()));
  for (int t = 0; t < num_tokens(); ++t) out.push_back(activated(t, layer));
  return out;
}

SpeculationTrace::SpeculationTrace(ModelShape shape) : shape_(shape) { check_shape(shape_); }

SpeculationTrace::SpeculationTrace(ModelShape shape, std::vector<SpeculationRecord> records)
    : shape_(shape), records_(std::move(records)) {
  check_shape(shape_);
  for (const auto& r : records_) {
    if (r.token < 0) throw ValidationError("negative token index " + std::to_string(r.token));
    if (r.layer < 1 || r.layer >= shape_.num_layers) {
      throw ValidationError("speculation layer " + std::to_string(r.layer) +
                            " out of range [1, " + std::to_string(shape_.num_layers) + ")");
    }
    check_set(shape_, r.guessed, "guessed", r.token, r.layer);
    check_set(shape_, r.actual, "actual", r.token, r.layer);
  }
  sort_records(records_);
  check_grid(records_, 1, shape_.num_layers);
}

int SpeculationTrace::num_tokens() const noexcept {
  if (shape_.num_layers < 2) return 0;
  return static_cast<int>(records_.size()) / (shape_.num_layers - 1);
}

const SpeculationRecord& SpeculationTrace::at(int token, int layer) const {
  if (token < 0 || token >= num_tokens() || layer < 1 || layer >= shape_.num_layers) {
    throw SelectionError("no speculation record at " + where(token, layer));
  }
  return records_[static_cast<std::size_t>(token) * (shape_.num_layers - 1) + (layer - 1)];
}

}  // namespace moecache
