// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "json_lines.hpp"

#include <istream>
#include <limits>
#include <ostream>
#include <vector>

#include "moecache/error.hpp"

namespace moecache::detail {

using nlohmann::ordered_json;

void write_line(std::ostream& out, const ordered_json& j) { out << j.dump() << '\n'; }

ordered_json to_json_array(const ExpertSet& set) {
  ordered_json a = ordered_json::array();
  for (ExpertId id : set) a.push_back(id);
  return a;
}

std::optional<ordered_json> LineReader::next() {
  std::string text;
  if (!std::getline(in_, text)) {
    if (in_.bad()) throw IoError("read failure after line " + std::to_string(line_));
    return std::nullopt;
  }
  ++line_;
  if (!text.empty() && text.back() == '\r') text.pop_back();
  if (text.empty()) throw ParseError("empty line", line_);
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line_);
  }
}

void expect_keys(const ordered_json& j, std::initializer_list<const char*> keys,
                 std::size_t line) {
  if (!j.is_object()) throw ParseError("expected a JSON object", line);
  std::string wanted;
  for (const char* k : keys) wanted += std::string(wanted.empty() ? "" : ",") + k;
  if (j.size() != keys.size()) {
    throw ParseError("expected keys [" + wanted + "] in this order", line);
  }
  auto it = j.begin();
  for (const char* k : keys) {
    if (it.key() != k) throw ParseError("expected keys [" + wanted + "] in this order", line);
    ++it;
  }
}

int get_int(const ordered_json& j, const char* key, std::size_t line) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) {
    throw ParseError(std::string("\"") + key + "\" must be an integer", line);
  }
  const auto x = v.get<long long>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ParseError(std::string("\"") + key + "\" out of range", line);
  }
  return static_cast<int>(x);
}

double get_double(const ordered_json& j, const char* key, std::size_t line) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ParseError(std::string("\"") + key + "\" must be a number", line);
  return v.get<double>();
}

ExpertSet get_set(const ordered_json& j, const char* key, std::size_t line) {
  const auto& v = j.at(key);
  if (!v.is_array()) throw ParseError(std::string("\"") + key + "\" must be an array", line);
  std::vector<ExpertId> ids;
  ids.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number_integer()) {
      throw ParseError(std::string("\"") + key + "\" must hold integers", line);
    }
    const auto x = e.get<long long>();
    if (x > std::numeric_limits<int>::max()) {
      throw ValidationError("line " + std::to_string(line) + ": expert id out of range");
    }
    ids.push_back(static_cast<ExpertId>(x));
  }
  try {
    return ExpertSet(std::move(ids));
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line) + ": " + e.what());
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

}  // namespace moecache::detail
