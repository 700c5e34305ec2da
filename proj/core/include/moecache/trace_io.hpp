// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <variant>

#include "moecache/trace.hpp"

namespace moecache {

// JSON Lines trace format. The first line is a header
//   {"kind":"activation"|"speculation","num_layers":L,"num_experts":E,"top_k":K}
// followed by one record per (token, layer):
//   {"t":0,"l":3,"a":[1,5]}            activation
//   {"t":0,"l":3,"g":[1,4],"a":[1,5]}  speculation
// Keys appear in exactly this order and sets are sorted ascending.

using AnyTrace = std::variant<ActivationTrace, SpeculationTrace>;

/// Throws IoError if the stream fails.
void write_trace(std::ostream& out, const ActivationTrace& trace);
void write_trace(std::ostream& out, const SpeculationTrace& trace);

/// Throws ParseError (with the offending line number) for malformed text and
/// ValidationError for well-formed records that break a trace invariant.
AnyTrace read_trace(std::istream& in);
ActivationTrace read_activation_trace(std::istream& in);
SpeculationTrace read_speculation_trace(std::istream& in);

void save_trace(const std::filesystem::path& path, const ActivationTrace& trace);
void save_trace(const std::filesystem::path& path, const SpeculationTrace& trace);
AnyTrace load_trace(const std::filesystem::path& path);
ActivationTrace load_activation_trace(const std::filesystem::path& path);
SpeculationTrace load_speculation_trace(const std::filesystem::path& path);

}  // namespace moecache
