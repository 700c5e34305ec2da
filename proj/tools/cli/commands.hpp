// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "moecache/cache_sim.hpp"
#include "moecache/cost_model.hpp"
#include "moecache/kv_config.hpp"
#include "moecache/trace.hpp"

namespace moecache::cli {

struct Context {
  std::ostream& out;
  std::ostream& err;
  /// Set by the selected subcommand's callback; runs after parsing succeeds.
  std::function<void()> action;
};

void print_json(std::ostream& out, const nlohmann::ordered_json& j);
/// Throws IoError if the file cannot be written.
void write_text_file(const std::string& path, const std::string& text);

/// Flags shared by every command that builds traces or a toy model.
/// Values come from the flag if given, else --config, else the default.
struct GeneratorFlags {
  std::string model = "zipf";
  int layers = 32;
  int experts = 8;
  int top_k = 2;
  int tokens = 512;
  double skew = 1.0;
  double repeat_prob = 0.3;
  bool shared_ranking = false;
  int hidden_dim = 16;
  double mixing_scale = 0.1;
  std::uint64_t seed = 42;
  std::string config;

  /// Without `with_model` only the toy model's flags are added.
  void add_to(CLI::App& app, bool with_model);
  bool given(const std::string& flag) const;

 private:
  std::map<std::string, CLI::Option*> options_;
};

struct GeneratorSpec {
  std::string model;
  ModelShape shape;
  int tokens = 0;
  double skew = 1.0;
  double repeat_prob = 0.3;
  bool per_layer_permutation = true;
  int hidden_dim = 16;
  double mixing_scale = 0.1;
  std::uint64_t seed = 42;

  /// Throws ConfigError for any invalid combination.
  void validate() const;
};

struct Generated {
  ActivationTrace activations;
  std::optional<SpeculationTrace> speculations;
};

GeneratorSpec resolve(const GeneratorFlags& flags, const KvConfig& kv);
Generated generate(const GeneratorSpec& spec);

struct CostFlags {
  std::optional<std::uint64_t> expert_bytes;
  std::optional<double> bandwidth;
  std::optional<double> compute;
  std::optional<double> overlap;

  void add_to(CLI::App& app);
  CostParams resolve(const KvConfig& kv) const;
};

/// Loads --config if the path is non-empty; keys outside the known set are rejected.
KvConfig load_config(const std::string& path);

/// Exactly one of cache_size / offloads must be set.
int resolve_cache_size(const std::optional<int>& cache_size, const std::optional<int>& offloads,
                       const ModelShape& shape);

void add_gen_trace(CLI::App& app, Context& ctx);
void add_simulate(CLI::App& app, Context& ctx);
void add_speculate(CLI::App& app, Context& ctx);
void add_metrics(CLI::App& app, Context& ctx);
void add_cost(CLI::App& app, Context& ctx);
void add_render(CLI::App& app, Context& ctx);
void add_compare(CLI::App& app, Context& ctx);
void add_sweep(CLI::App& app, Context& ctx);

}  // namespace moecache::cli
