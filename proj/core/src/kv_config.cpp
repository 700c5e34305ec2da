// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "moecache/kv_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "moecache/error.hpp"

namespace moecache {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, const std::string& text) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("key \"" + std::string(key) + "\": \"" + text + "\" is not a valid number");
  }
  return v;
}

}  // namespace

KvConfig KvConfig::parse(std::istream& in) {
  KvConfig kv;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto text = trim(raw);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line);
    const auto key = trim(text.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line);
    kv.entries_.emplace_back(std::string(key), std::string(trim(text.substr(eq + 1))));
  }
  if (in.bad()) throw IoError("read failure in key-value config");
  return kv;
}

KvConfig KvConfig::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse(in);
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse(in);
}

bool KvConfig::has(std::string_view key) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == key; });
}

std::optional<std::string> KvConfig::get(std::string_view key) const {
  std::optional<std::string> found;
  for (const auto& [k, v] : entries_) {
    if (k != key) continue;
    if (found) throw ConfigError("key \"" + std::string(key) + "\" given more than once");
    found = v;
  }
  return found;
}

std::vector<std::string> KvConfig::get_all(std::string_view key) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) {
    if (k == key) out.push_back(v);
  }
  return out;
}

std::string KvConfig::get_string(std::string_view key, std::string_view fallback) const {
  auto v = get(key);
  return v ? *v : std::string(fallback);
}

long KvConfig::get_int(std::string_view key, long fallback) const {
  auto v = get(key);
  return v ? parse_number<long>(key, *v) : fallback;
}

std::uint64_t KvConfig::get_u64(std::string_view key, std::uint64_t fallback) const {
  auto v = get(key);
  return v ? parse_number<std::uint64_t>(key, *v) : fallback;
}

double KvConfig::get_double(std::string_view key, double fallback) const {
  auto v = get(key);
  return v ? parse_number<double>(key, *v) : fallback;
}

bool KvConfig::get_bool(std::string_view key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("key \"" + std::string(key) + "\": \"" + *v + "\" is not a boolean");
}

std::vector<long> KvConfig::get_int_list(std::string_view key, std::vector<long> fallback) const {
  auto v = get(key);
  return v ? parse_int_list(*v) : fallback;
}

std::vector<double> KvConfig::get_double_list(std::string_view key,
                                              std::vector<double> fallback) const {
  auto v = get(key);
  return v ? parse_double_list(*v) : fallback;
}

void KvConfig::set(std::string key, std::string value) {
  std::erase_if(entries_, [&](const auto& e) { return e.first == key; });
  entries_.emplace_back(std::move(key), std::move(value));
}

void KvConfig::require_known(const std::vector<std::string_view>& allowed) const {
  for (const auto& [k, v] : entries_) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError("unknown config key \"" + k + "\"");
    }
  }
}

namespace {

std::vector<std::string_view> split_commas(std::string_view text) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = text.find(',');
    out.push_back(trim(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
  }
  return out;
}

}  // namespace

std::vector<long> parse_int_list(std::string_view text) {
  std::vector<long> out;
  if (trim(text).empty()) return out;
  for (auto item : split_commas(text)) {
    const auto dots = item.find("..");
    if (dots == std::string_view::npos) {
      out.push_back(parse_number<long>("list", std::string(item)));
      continue;
    }
    const long lo = parse_number<long>("list", std::string(trim(item.substr(0, dots))));
    const long hi = parse_number<long>("list", std::string(trim(item.substr(dots + 2))));
    if (hi < lo) throw ConfigError("empty range \"" + std::string(item) + "\"");
    for (long x = lo; x <= hi; ++x) out.push_back(x);
  }
  return out;
}

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (auto item : split_commas(text)) out.push_back(parse_number<double>("list", std::string(item)));
  return out;
}

ToyModelConfig toy_config_from(const KvConfig& kv, ToyModelConfig base) {
  base.shape.num_layers = static_cast<int>(kv.get_int("layers", base.shape.num_layers));
  base.shape.num_experts = static_cast<int>(kv.get_int("experts", base.shape.num_experts));
  base.shape.top_k = static_cast<int>(kv.get_int("top_k", base.shape.top_k));
  base.hidden_dim = static_cast<int>(kv.get_int("hidden_dim", base.hidden_dim));
  base.mixing_scale = kv.get_double("mixing_scale", base.mixing_scale);
  base.skew = kv.get_double("skew", base.skew);
  base.seed = kv.get_u64("seed", base.seed);
  base.num_tokens = static_cast<int>(kv.get_int("tokens", base.num_tokens));
  base.validate();
  return base;
}

CostParams cost_params_from(const KvConfig& kv, CostParams base) {
  base.expert_bytes = kv.get_u64("expert_bytes", base.expert_bytes);
  base.bandwidth_bytes_per_s = kv.get_double("bandwidth_bytes_per_s", base.bandwidth_bytes_per_s);
  base.compute_s_per_layer = kv.get_double("compute_s_per_layer", base.compute_s_per_layer);
  base.overlap = kv.get_double("overlap", base.overlap);
  base.validate();
  return base;
}

const std::vector<std::string_view>& model_config_keys() {
  static const std::vector<std::string_view> keys = {
      "layers",       "experts", "top_k", "hidden_dim",   "mixing_scale",          "skew",
      "seed",         "tokens",  "expert_bytes", "bandwidth_bytes_per_s", "compute_s_per_layer",
      "overlap"};
  return keys;
}

}  // namespace moecache
