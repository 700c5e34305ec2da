// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "moecache/cost_model.hpp"
#include "moecache/toy_moe.hpp"

namespace moecache {

/// Flat `key = value` file. Blank lines and lines starting with '#' are
/// ignored. A key may repeat; `get` rejects repeats, `get_all` returns them in order.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse(std::istream& in);
  static KvConfig parse(std::string_view text);
  static KvConfig load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;
  std::vector<std::string> get_all(std::string_view key) const;

  std::string get_string(std::string_view key, std::string_view fallback) const;
  long get_int(std::string_view key, long fallback) const;
  std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
  double get_double(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  /// Comma-separated list; integer lists also accept inclusive ranges "a..b".
  std::vector<long> get_int_list(std::string_view key, std::vector<long> fallback) const;
  std::vector<double> get_double_list(std::string_view key, std::vector<double> fallback) const;

  void set(std::string key, std::string value);

  /// Throws ConfigError naming the first key not in `allowed`.
  void require_known(const std::vector<std::string_view>& allowed) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// "1,2,5..8" -> {1,2,5,6,7,8}. Throws ConfigError on malformed text or a descending range.
std::vector<long> parse_int_list(std::string_view text);
std::vector<double> parse_double_list(std::string_view text);

/// Keys: layers, experts, top_k, hidden_dim, mixing_scale, skew, seed, tokens.
ToyModelConfig toy_config_from(const KvConfig& kv, ToyModelConfig base = {});
/// Keys: expert_bytes, bandwidth_bytes_per_s, compute_s_per_layer, overlap.
CostParams cost_params_from(const KvConfig& kv, CostParams base = {});

/// Every key the two readers above understand.
const std::vector<std::string_view>& model_config_keys();

}  // namespace moecache
