// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

// Shared helpers for the JSON Lines readers and writers. Not installed.

#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "moecache/expert_set.hpp"

namespace moecache::detail {

void write_line(std::ostream& out, const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json_array(const ExpertSet& set);

/// Yields one parsed JSON value per line; throws ParseError with the line number.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}
  std::optional<nlohmann::ordered_json> next();
  std::size_t line_number() const noexcept { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

/// The object must have exactly `keys`, in that order.
void expect_keys(const nlohmann::ordered_json& j, std::initializer_list<const char*> keys,
                 std::size_t line);
int get_int(const nlohmann::ordered_json& j, const char* key, std::size_t line);
double get_double(const nlohmann::ordered_json& j, const char* key, std::size_t line);
ExpertSet get_set(const nlohmann::ordered_json& j, const char* key, std::size_t line);

std::ofstream open_for_write(const std::filesystem::path& path);
std::ifstream open_for_read(const std::filesystem::path& path);

}  // namespace moecache::detail
