// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "moecache/trace_io.hpp"

#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "json_lines.hpp"
#include "moecache/error.hpp"

namespace moecache {

using nlohmann::ordered_json;

namespace {

ordered_json header_json(const char* kind, const ModelShape& shape) {
  ordered_json h;
  h["kind"] = kind;
  h["num_layers"] = shape.num_layers;
  h["num_experts"] = shape.num_experts;
  h["top_k"] = shape.top_k;
  return h;
}

ModelShape parse_header_shape(const ordered_json& h, std::size_t line) {
  detail::expect_keys(h, {"kind", "num_layers", "num_experts", "top_k"}, line);
  ModelShape shape;
  shape.num_layers = detail::get_int(h, "num_layers", line);
  shape.num_experts = detail::get_int(h, "num_experts", line);
  shape.top_k = detail::get_int(h, "top_k", line);
  try {
    shape.validate();
  } catch (const ConfigError& e) {
    throw ValidationError("line " + std::to_string(line) + ": " + e.what());
  }
  return shape;
}

void finish_write(std::ostream& out) {
  out.flush();
  if (!out) throw IoError("failed writing trace");
}

}  // namespace

void write_trace(std::ostream& out, const ActivationTrace& trace) {
  detail::write_line(out, header_json("activation", trace.shape()));
  for (const auto& r : trace.records()) {
    ordered_json j;
    j["t"] = r.token;
    j["l"] = r.layer;
    j["a"] = detail::to_json_array(r.activated);
    detail::write_line(out, j);
  }
  finish_write(out);
}

void write_trace(std::ostream& out, const SpeculationTrace& trace) {
  detail::write_line(out, header_json("speculation", trace.shape()));
  for (const auto& r : trace.records()) {
    ordered_json j;
    j["t"] = r.token;
    j["l"] = r.layer;
    j["g"] = detail::to_json_array(r.guessed);
    j["a"] = detail::to_json_array(r.actual);
    detail::write_line(out, j);
  }
  finish_write(out);
}

AnyTrace read_trace(std::istream& in) {
  detail::LineReader reader(in);
  auto header = reader.next();
  if (!header) throw ParseError("missing header line", 1);
  const std::size_t header_line = reader.line_number();
  if (!header->contains("kind") || !(*header)["kind"].is_string()) {
    throw ParseError("header has no string \"kind\"", header_line);
  }
  const std::string kind = (*header)["kind"].get<std::string>();
  const ModelShape shape = parse_header_shape(*header, header_line);

  if (kind == "activation") {
    std::vector<ActivationRecord> records;
    while (auto j = reader.next()) {
      const std::size_t line = reader.line_number();
      detail::expect_keys(*j, {"t", "l", "a"}, line);
      records.push_back({detail::get_int(*j, "t", line), detail::get_int(*j, "l", line),
                         detail::get_set(*j, "a", line)});
    }
    return ActivationTrace(shape, std::move(records));
  }
  if (kind == "speculation") {
    std::vector<SpeculationRecord> records;
    while (auto j = reader.next()) {
      const std::size_t line = reader.line_number();
      detail::expect_keys(*j, {"t", "l", "g", "a"}, line);
      records.push_back({detail::get_int(*j, "t", line), detail::get_int(*j, "l", line),
                         detail::get_set(*j, "g", line), detail::get_set(*j, "a", line)});
    }
    return SpeculationTrace(shape, std::move(records));
  }
  throw ParseError("unknown trace kind \"" + kind + "\"", header_line);
}

ActivationTrace read_activation_trace(std::istream& in) {
  auto any = read_trace(in);
  if (auto* t = std::get_if<ActivationTrace>(&any)) return std::move(*t);
  throw ValidationError("expected an activation trace, found a speculation trace");
}

SpeculationTrace read_speculation_trace(std::istream& in) {
  auto any = read_trace(in);
  if (auto* t = std::get_if<SpeculationTrace>(&any)) return std::move(*t);
  throw ValidationError("expected a speculation trace, found an activation trace");
}

void save_trace(const std::filesystem::path& path, const ActivationTrace& trace) {
  auto out = detail::open_for_write(path);
  write_trace(out, trace);
}

void save_trace(const std::filesystem::path& path, const SpeculationTrace& trace) {
  auto out = detail::open_for_write(path);
  write_trace(out, trace);
}

AnyTrace load_trace(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  return read_trace(in);
}

ActivationTrace load_activation_trace(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  return read_activation_trace(in);
}

SpeculationTrace load_speculation_trace(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  return read_speculation_trace(in);
}

}  // namespace moecache
