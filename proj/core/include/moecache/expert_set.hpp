// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace moecache {

/// 0-based index of an expert within one MoE layer.
using ExpertId = int;

/// Sorted, duplicate-free set of expert ids.
///
/// Sets in this domain hold K (typically 1-2) or C (typically 2-8) members, so
/// a sorted vector beats any node-based container and gives canonical
/// iteration order for serialization.
class ExpertSet {
 public:
  ExpertSet() = default;

  /// Throws ValidationError on duplicates or negative ids.
  explicit ExpertSet(std::vector<ExpertId> ids);
  ExpertSet(std::initializer_list<ExpertId> ids);

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  bool contains(ExpertId id) const noexcept;

  /// Returns false if `id` was already present.
  bool insert(ExpertId id);
  bool erase(ExpertId id);

  auto begin() const noexcept { return ids_.begin(); }
  auto end() const noexcept { return ids_.end(); }
  std::span<const ExpertId> ids() const noexcept { return ids_; }
  ExpertId max() const { return ids_.back(); }

  friend bool operator==(const ExpertSet&, const ExpertSet&) = default;

 private:
  std::vector<ExpertId> ids_;
};

ExpertSet set_union(const ExpertSet& a, const ExpertSet& b);
ExpertSet set_intersection(const ExpertSet& a, const ExpertSet& b);
/// Members of `a` not in `b`.
ExpertSet set_difference(const ExpertSet& a, const ExpertSet& b);
std::size_t intersection_size(const ExpertSet& a, const ExpertSet& b);

std::string to_string(const ExpertSet& s);

}  // namespace moecache
