// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include <memory>
#include <ostream>

#include <fmt/format.h>

#include "commands.hpp"
#include "moecache/error.hpp"
#include "moecache/metrics.hpp"
#include "moecache/policy.hpp"
#include "moecache/trace_io.hpp"

namespace moecache::cli {

using nlohmann::ordered_json;

namespace {

std::vector<PolicyKind> parse_policies(const std::string& text) {
  std::vector<PolicyKind> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = std::min(text.find(',', start), text.size());
    out.push_back(parse_policy(std::string_view(text).substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

struct RunResult {
  CacheCounts counts;
  LatencyEstimate latency;
};

RunResult run_one(const ActivationTrace& trace, const PolicyKind& policy, int cache_size,
                  int warmup, const CostParams& cost) {
  SimConfig config;
  config.policy = policy;
  config.cache_size = cache_size;
  config.warmup_tokens = warmup;
  const CacheEventLog log = simulate(trace, config);
  return {cache_metrics(log).total, estimate_latency(log, cost)};
}

ordered_json run_json(const RunResult& r) {
  ordered_json j;
  j["hit_rate"] = r.counts.hit_rate();
  j["precision"] = to_json(r.counts.precision());
  j["recall"] = to_json(r.counts.recall());
  j["tokens_per_second"] = r.latency.tokens_per_second;
  j["empty"] = r.counts.empty();
  return j;
}

// Mean over runs whose ratio is defined; null if none is.
ordered_json mean_of(const std::vector<std::optional<double>>& xs) {
  double sum = 0.0;
  int n = 0;
  for (const auto& x : xs) {
    if (!x) continue;
    sum += *x;
    ++n;
  }
  if (n == 0) return nullptr;
  return sum / n;
}

std::string cell(const ordered_json& v) {
  return v.is_null() ? std::string("-") : fmt::format("{:.4f}", v.get<double>());
}

/// Traces named by --trace, or --seeds generated ones starting at --seed.
struct TraceSource {
  GeneratorFlags gen;
  std::string trace;

  void add_to(CLI::App& app) {
    gen.add_to(app, true);
    app.add_option("--trace", trace, "Activation trace (instead of generating one)");
  }

  bool uses_generator() const {
    for (const char* f : {"model", "layers", "experts", "top_k", "tokens", "skew", "repeat_prob",
                          "shared_ranking", "hidden_dim", "mixing_scale", "seed"}) {
      if (gen.given(f)) return true;
    }
    return !gen.config.empty() && trace.empty();
  }
};

}  // namespace

void add_compare(CLI::App& app, Context& ctx) {
  struct Opts {
    TraceSource source;
    std::string policies;
    int seeds = 1;
    std::optional<int> cache_size;
    std::optional<int> offloads;
    int warmup = 0;
    bool json = false;
    CostFlags cost;
    CLI::Option* seeds_opt = nullptr;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("compare", "Compare cache policies on the same traces");
  cmd->add_option("--policies", opts->policies, "Comma-separated policies, e.g. lru,lfu")
      ->required();
  opts->source.add_to(*cmd);
  opts->seeds_opt = cmd->add_option("--seeds", opts->seeds, "Generate N traces, seeds --seed..");
  auto* cs = cmd->add_option("--cache-size", opts->cache_size, "Resident experts per layer");
  auto* off = cmd->add_option("--offloads", opts->offloads, "Experts per layer kept on the host");
  cs->excludes(off);
  cmd->add_option("--warmup", opts->warmup, "Leading tokens left out of the metrics");
  cmd->add_flag("--json", opts->json, "Print JSON instead of a table");
  opts->cost.add_to(*cmd);
  cmd->callback([opts, &ctx] {
    ctx.action = [opts, &ctx] {
      const std::vector<PolicyKind> policies = parse_policies(opts->policies);
      if (opts->seeds < 1) throw ConfigError("--seeds must be at least 1");
      if (opts->warmup < 0) throw ConfigError("--warmup must be non-negative");
      const bool from_file = !opts->source.trace.empty();
      if (from_file && (opts->seeds_opt->count() > 0 || opts->source.uses_generator())) {
        throw ConfigError("--trace cannot be combined with generator flags or --seeds");
      }
      if (opts->cache_size.has_value() == opts->offloads.has_value()) {
        throw ConfigError("give exactly one of --cache-size and --offloads");
      }
      const KvConfig kv = load_config(opts->source.gen.config);
      const CostParams cost = opts->cost.resolve(kv);

      std::vector<ActivationTrace> traces;
      ordered_json sources = ordered_json::array();
      if (from_file) {
        traces.push_back(load_activation_trace(opts->source.trace));
        sources.push_back({{"path", opts->source.trace}});
      } else {
        GeneratorSpec spec = resolve(opts->source.gen, kv);
        const std::uint64_t first = spec.seed;
        for (int i = 0; i < opts->seeds; ++i) {
          spec.seed = first + static_cast<std::uint64_t>(i);
          traces.push_back(generate(spec).activations);
          sources.push_back({{"model", spec.model}, {"seed", spec.seed}});
        }
      }
      const ModelShape shape = traces.front().shape();
      const int cache_size = resolve_cache_size(opts->cache_size, opts->offloads, shape);

      ordered_json rows = ordered_json::array();
      for (const auto& policy : policies) {
        std::vector<std::optional<double>> hit, prec, rec, tps;
        ordered_json per_trace = ordered_json::array();
        for (const auto& trace : traces) {
          const RunResult r = run_one(trace, policy, cache_size, opts->warmup, cost);
          hit.emplace_back(r.counts.hit_rate());
          prec.push_back(r.counts.precision().value());
          rec.push_back(r.counts.recall().value());
          tps.emplace_back(r.latency.tokens_per_second);
          per_trace.push_back(r.counts.hit_rate());
        }
        ordered_json row;
        row["policy"] = to_string(policy);
        row["mean_hit_rate"] = mean_of(hit);
        row["mean_precision"] = mean_of(prec);
        row["mean_recall"] = mean_of(rec);
        row["mean_tokens_per_second"] = mean_of(tps);
        row["hit_rates"] = std::move(per_trace);
        rows.push_back(std::move(row));
      }

      if (opts->json) {
        ordered_json j;
        j["cache_size"] = cache_size;
        j["offloads"] = shape.num_experts - cache_size;
        j["warmup_tokens"] = opts->warmup;
        j["traces"] = std::move(sources);
        j["rows"] = std::move(rows);
        print_json(ctx.out, j);
        return;
      }
      ctx.out << fmt::format("{:<16} {:>10} {:>10} {:>10} {:>12}\n", "policy", "hit rate",
                             "precision", "recall", "tokens/s");
      for (const auto& row : rows) {
        ctx.out << fmt::format("{:<16} {:>10} {:>10} {:>10} {:>12.2f}\n",
                               row["policy"].get<std::string>(), cell(row["mean_hit_rate"]),
                               cell(row["mean_precision"]), cell(row["mean_recall"]),
                               row["mean_tokens_per_second"].get<double>());
      }
      ctx.out << fmt::format("{} trace(s), cache size {}, {} offload(s) per layer\n",
                             traces.size(), cache_size, shape.num_experts - cache_size);
    };
  });
}

void add_sweep(CLI::App& app, Context& ctx) {
  struct Opts {
    TraceSource source;
    std::string policies = "lru,lfu,opt";
    std::optional<std::string> cache_sizes;
    std::optional<std::string> offloads;
    std::optional<std::string> fit_memory;
    int warmup = 0;
    CostFlags cost;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("sweep", "Run policies over a range of cache sizes");
  opts->source.add_to(*cmd);
  cmd->add_option("--policies", opts->policies, "Comma-separated policies");
  auto* cs = cmd->add_option("--cache-sizes", opts->cache_sizes, "Cache sizes, e.g. 2..8");
  auto* off = cmd->add_option("--offloads", opts->offloads, "Offloads per layer, e.g. 0..6");
  cs->excludes(off);
  cmd->add_option("--fit-memory", opts->fit_memory,
                  "Peak memory points \"offloads:MB,...\" (default: Mixtral 8x7B points)");
  cmd->add_option("--warmup", opts->warmup, "Leading tokens left out of the metrics");
  opts->cost.add_to(*cmd);
  cmd->callback([opts, &ctx] {
    ctx.action = [opts, &ctx] {
      const std::vector<PolicyKind> policies = parse_policies(opts->policies);
      if (opts->cache_sizes.has_value() == opts->offloads.has_value()) {
        throw ConfigError("give exactly one of --cache-sizes and --offloads");
      }
      if (opts->warmup < 0) throw ConfigError("--warmup must be non-negative");
      const std::vector<long> range = parse_int_list(opts->cache_sizes ? *opts->cache_sizes
                                                                       : *opts->offloads);
      if (range.empty()) throw ConfigError("empty range");
      const bool from_file = !opts->source.trace.empty();
      if (from_file && opts->source.uses_generator()) {
        throw ConfigError("--trace cannot be combined with generator flags");
      }
      const KvConfig kv = load_config(opts->source.gen.config);
      const CostParams cost = opts->cost.resolve(kv);
      const MemoryModel memory = fit_memory_model(
          opts->fit_memory ? parse_memory_points(*opts->fit_memory) : mixtral_offload_memory_points());

      std::optional<GeneratorSpec> spec;
      if (!from_file) spec = resolve(opts->source.gen, kv);
      const ModelShape shape = spec ? spec->shape : ModelShape{};

      // Validate every configuration against the shape before simulating.
      auto to_cache_size = [&](const ModelShape& s, long v) {
        const int c = opts->cache_sizes ? static_cast<int>(v)
                                        : offloads_to_cache_size(static_cast<int>(v), s);
        if (c < s.top_k || c > s.num_experts) {
          throw ConfigError("cache size " + std::to_string(c) + " outside [" +
                            std::to_string(s.top_k) + ", " + std::to_string(s.num_experts) + "]");
        }
        return c;
      };
      if (spec) {
        for (long v : range) to_cache_size(shape, v);
      }
      const ActivationTrace trace =
          from_file ? load_activation_trace(opts->source.trace) : generate(*spec).activations;
      std::vector<int> sizes;
      for (long v : range) sizes.push_back(to_cache_size(trace.shape(), v));

      ordered_json rows = ordered_json::array();
      for (int c : sizes) {
        const int o = trace.shape().num_experts - c;
        ordered_json row;
        row["cache_size"] = c;
        row["offloads"] = o;
        row["peak_mb"] = estimate_peak_memory(memory, double(o));
        ordered_json per = ordered_json::object();
        for (const auto& p : policies) per[to_string(p)] = run_json(run_one(trace, p, c, opts->warmup, cost));
        row["policies"] = std::move(per);
        rows.push_back(std::move(row));
      }
      ordered_json j;
      j["trace"] = from_file ? ordered_json(opts->source.trace)
                             : ordered_json({{"model", spec->model}, {"seed", spec->seed}});
      j["warmup_tokens"] = opts->warmup;
      j["memory_model"] = to_json(memory);
      j["rows"] = std::move(rows);
      print_json(ctx.out, j);
    };
  });
}

}  // namespace moecache::cli
