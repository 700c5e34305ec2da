// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "moecache/expert_set.hpp"

#include <algorithm>
#include <iterator>

#include "moecache/error.hpp"

namespace moecache {

ExpertSet::ExpertSet(std::vector<ExpertId> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  if (!ids_.empty() && ids_.front() < 0) {
    throw ValidationError("negative expert id " + std::to_string(ids_.front()));
  }
  auto dup = std::adjacent_find(ids_.begin(), ids_.end());
  if (dup != ids_.end()) {
    throw ValidationError("duplicate expert id " + std::to_string(*dup));
  }
}

ExpertSet::ExpertSet(std::initializer_list<ExpertId> ids)
    : ExpertSet(std::vector<ExpertId>(ids)) {}

bool ExpertSet::contains(ExpertId id) const noexcept {
  return std::binary_search(ids_.begin(), ids_.end(), id);
}

bool ExpertSet::insert(ExpertId id) {
  if (id < 0) throw ValidationError("negative expert id " + std::to_string(id));
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it != ids_.end() && *it == id) return false;
  ids_.insert(it, id);
  return true;
}

bool ExpertSet::erase(ExpertId id) {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) return false;
  ids_.erase(it);
  return true;
}

namespace {

template <typename Op>
ExpertSet combine(const ExpertSet& a, const ExpertSet& b, Op op) {
  std::vector<ExpertId> out;
  op(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return ExpertSet(std::move(out));
}

}  // namespace

ExpertSet set_union(const ExpertSet& a, const ExpertSet& b) {
  return combine(a, b, [](auto... args) { return std::set_union(args...); });
}

ExpertSet set_intersection(const ExpertSet& a, const ExpertSet& b) {
  return combine(a, b, [](auto... args) { return std::set_intersection(args...); });
}

ExpertSet set_difference(const ExpertSet& a, const ExpertSet& b) {
  return combine(a, b, [](auto... args) { return std::set_difference(args...); });
}

std::size_t intersection_size(const ExpertSet& a, const ExpertSet& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

std::string to_string(const ExpertSet& s) {
  std::string out = "{";
  for (auto it = s.begin(); it != s.end(); ++it) {
    if (it != s.begin()) out += ",";
    out += std::to_string(*it);
  }
  return out + "}";
}

}  // namespace moecache
