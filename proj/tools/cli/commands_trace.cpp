// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include <memory>

#include "commands.hpp"
#include "moecache/error.hpp"
#include "moecache/metrics.hpp"
#include "moecache/policy.hpp"
#include "moecache/trace_io.hpp"

namespace moecache::cli {

using nlohmann::ordered_json;

namespace {

ordered_json shape_json(const ModelShape& s) {
  ordered_json j;
  j["num_layers"] = s.num_layers;
  j["num_experts"] = s.num_experts;
  j["top_k"] = s.top_k;
  return j;
}

template <class Trace>
ordered_json trace_summary(const std::string& kind, const std::string& path, const Trace& t) {
  ordered_json j;
  j["kind"] = kind;
  j["path"] = path;
  j.update(shape_json(t.shape()));
  j["num_tokens"] = t.num_tokens();
  j["records"] = t.records().size();
  return j;
}

}  // namespace

void add_gen_trace(CLI::App& app, Context& ctx) {
  struct Opts {
    GeneratorFlags gen;
    std::string out;
    std::string out_spec;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("gen-trace", "Generate an activation trace");
  opts->gen.add_to(*cmd, true);
  cmd->add_option("--out", opts->out, "Activation trace output (JSON Lines)")->required();
  cmd->add_option("--out-spec", opts->out_spec, "Speculation trace output (toy model only)");
  cmd->callback([opts, &ctx] {
    ctx.action = [opts, &ctx] {
      const KvConfig kv = load_config(opts->gen.config);
      const GeneratorSpec spec = resolve(opts->gen, kv);
      const bool toy = spec.model == "toy";
      if (toy && opts->out_spec.empty()) throw ConfigError("--model toy needs --out-spec");
      if (!toy && !opts->out_spec.empty()) {
        throw ConfigError("--out-spec is only produced by --model toy");
      }
      Generated g = generate(spec);
      save_trace(opts->out, g.activations);
      ordered_json j = trace_summary("activation", opts->out, g.activations);
      j["model"] = spec.model;
      j["seed"] = spec.seed;
      if (g.speculations) {
        save_trace(opts->out_spec, *g.speculations);
        j["speculation"] = trace_summary("speculation", opts->out_spec, *g.speculations);
      }
      print_json(ctx.out, j);
    };
  });
}

void add_simulate(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string trace;
    std::string policy = "lru";
    std::optional<int> cache_size;
    std::optional<int> offloads;
    int warmup = 0;
    std::string layers;
    std::string out;
    std::string config;
    CostFlags cost;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("simulate", "Replay a trace through an expert cache");
  cmd->add_option("--trace", opts->trace, "Activation trace")->required();
  cmd->add_option("--policy", opts->policy, "lru, lfu, lfu-aged[:factor:period] or opt");
  auto* cs = cmd->add_option("--cache-size", opts->cache_size, "Resident experts per layer");
  auto* off = cmd->add_option("--offloads", opts->offloads, "Experts per layer kept on the host");
  cs->excludes(off);
  cmd->add_option("--warmup", opts->warmup, "Leading tokens left out of the metrics");
  cmd->add_option("--layers", opts->layers, "Layers to simulate, e.g. 0,3..5 (default all)");
  cmd->add_option("--out", opts->out, "Event log output (JSON Lines)")->required();
  cmd->add_option("--config", opts->config, "key = value file with cost parameters");
  opts->cost.add_to(*cmd);
  cmd->callback([opts, &ctx] {
    ctx.action = [opts, &ctx] {
      SimConfig config;
      config.policy = parse_policy(opts->policy);
      if (opts->warmup < 0) throw ConfigError("--warmup must be non-negative");
      config.warmup_tokens = opts->warmup;
      if (!opts->layers.empty()) {
        std::vector<int> layers;
        for (long l : parse_int_list(opts->layers)) layers.push_back(static_cast<int>(l));
        config.layers = std::move(layers);
      }
      if (opts->cache_size.has_value() == opts->offloads.has_value()) {
        throw ConfigError("give exactly one of --cache-size and --offloads");
      }
      const CostParams cost = opts->cost.resolve(load_config(opts->config));

      const ActivationTrace trace = load_activation_trace(opts->trace);
      config.cache_size = resolve_cache_size(opts->cache_size, opts->offloads, trace.shape());
      const CacheEventLog log = simulate(trace, config);
      save_event_log(opts->out, log);

      ordered_json j;
      j["trace"] = opts->trace;
      j["events"] = opts->out;
      j["policy"] = to_string(log.config.policy);
      j["cache_size"] = log.config.cache_size;
      j["offloads"] = log.shape.num_experts - log.config.cache_size;
      j["warmup_tokens"] = log.config.warmup_tokens;
      j["metrics"] = to_json(cache_metrics(log));
      if (log.config.warmup_tokens > 0) {
        j["all_steps"] = to_json(cache_metrics(log, {.warmup_tokens = 0}));
      }
      j["cost"] = to_json(estimate_latency(log, cost));
      print_json(ctx.out, j);
    };
  });
}

void add_speculate(CLI::App& app, Context& ctx) {
  struct Opts {
    GeneratorFlags gen;
    std::string out;
    std::string out_spec;
    CostFlags cost;
  };
  auto opts = std::make_shared<Opts>();
  opts->gen.tokens = 64;
  auto* cmd = app.add_subcommand(
      "speculate", "Run the toy model and score next-layer expert guesses");
  opts->gen.add_to(*cmd, false);
  cmd->add_option("--out", opts->out, "Also write the activation trace");
  cmd->add_option("--out-spec", opts->out_spec, "Also write the speculation trace");
  opts->cost.add_to(*cmd);
  cmd->callback([opts, &ctx] {
    ctx.action = [opts, &ctx] {
      const KvConfig kv = load_config(opts->gen.config);
      GeneratorFlags flags = opts->gen;
      flags.model = "toy";
      GeneratorSpec spec = resolve(flags, kv);
      spec.model = "toy";
      spec.validate();
      const CostParams cost = opts->cost.resolve(kv);

      Generated g = generate(spec);
      if (!opts->out.empty()) save_trace(opts->out, g.activations);
      if (!opts->out_spec.empty()) save_trace(opts->out_spec, *g.speculations);

      const SpeculationMetrics m = speculation_metrics(*g.speculations);
      ordered_json j;
      ordered_json model = shape_json(spec.shape);
      model["hidden_dim"] = spec.hidden_dim;
      model["mixing_scale"] = spec.mixing_scale;
      model["skew"] = spec.skew;
      model["seed"] = spec.seed;
      model["tokens"] = spec.tokens;
      j["model"] = std::move(model);
      j["accuracy"] = to_json(m.total.recall());
      j["speculation"] = to_json(m);
      j["cost"] = to_json(speculation_cost(*g.speculations, cost));
      print_json(ctx.out, j);
    };
  });
}

}  // namespace moecache::cli
