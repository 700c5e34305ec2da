// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include <memory>
#include <ostream>

#include "commands.hpp"
#include "moecache/error.hpp"
#include "moecache/metrics.hpp"
#include "moecache/policy.hpp"
#include "moecache/render.hpp"
#include "moecache/trace_io.hpp"

namespace moecache::cli {

using nlohmann::ordered_json;

namespace {

int count_given(std::initializer_list<bool> flags) {
  int n = 0;
  for (bool f : flags) n += f ? 1 : 0;
  return n;
}

ordered_json params_json(const CostParams& p) {
  ordered_json j;
  j["expert_bytes"] = p.expert_bytes;
  j["bandwidth_bytes_per_s"] = p.bandwidth_bytes_per_s;
  j["compute_s_per_layer"] = p.compute_s_per_layer;
  j["overlap"] = p.overlap;
  return j;
}

}  // namespace

void add_metrics(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string log;
    std::string spec;
    std::string trace;
    std::optional<int> warmup;
    bool full_cache_only = false;
    std::string config;
    CostFlags cost;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("metrics", "Summarize an event log, speculation or activation trace");
  cmd->add_option("--log", opts->log, "Event log from simulate");
  cmd->add_option("--spec", opts->spec, "Speculation trace");
  cmd->add_option("--trace", opts->trace, "Activation trace (expert histograms)");
  cmd->add_option("--warmup", opts->warmup, "Override the log's warmup tokens");
  cmd->add_flag("--full-cache-only", opts->full_cache_only, "Count only steps with a full cache");
  cmd->add_option("--config", opts->config, "key = value file with cost parameters");
  opts->cost.add_to(*cmd);
  cmd->callback([opts, &ctx] {
    ctx.action = [opts, &ctx] {
      if (count_given({!opts->log.empty(), !opts->spec.empty(), !opts->trace.empty()}) != 1) {
        throw ConfigError("give exactly one of --log, --spec and --trace");
      }
      if (opts->warmup && *opts->warmup < 0) throw ConfigError("--warmup must be non-negative");
      const CostParams cost = opts->cost.resolve(load_config(opts->config));

      ordered_json j;
      if (!opts->log.empty()) {
        const CacheEventLog log = load_event_log(opts->log);
        CacheMetricsOptions mo;
        mo.warmup_tokens = opts->warmup;
        mo.full_cache_only = opts->full_cache_only;
        j["policy"] = to_string(log.config.policy);
        j["cache_size"] = log.config.cache_size;
        j["warmup_tokens"] = mo.warmup_tokens.value_or(log.config.warmup_tokens);
        j["full_cache_only"] = mo.full_cache_only;
        j.update(to_json(cache_metrics(log, mo)));
        j["cost"] = to_json(estimate_latency(log, cost));
      } else if (!opts->spec.empty()) {
        const SpeculationTrace trace = load_speculation_trace(opts->spec);
        const SpeculationMetrics m = speculation_metrics(trace);
        j.update(to_json(m));
        j["precision_equals_recall"] = m.total.fp == m.total.fn;
        j["cost"] = to_json(speculation_cost(trace, cost));
      } else {
        const ActivationTrace trace = load_activation_trace(opts->trace);
        ordered_json hist = ordered_json::array();
        for (const auto& h : expert_histograms(trace)) hist.push_back(to_json(h));
        j["num_tokens"] = trace.num_tokens();
        j["repeat_rate"] = to_json(repeat_rate(trace));
        j["random_repeat_rate"] =
            double(trace.shape().top_k) / double(trace.shape().num_experts);
        j["histograms"] = std::move(hist);
      }
      print_json(ctx.out, j);
    };
  });
}

void add_cost(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string log;
    std::string spec;
    std::optional<std::string> fit_memory;
    std::string offloads;
    std::string config;
    CostFlags cost;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("cost", "Latency, transfer and memory estimates");
  cmd->add_option("--log", opts->log, "Event log from simulate");
  cmd->add_option("--spec", opts->spec, "Speculation trace");
  cmd->add_option("--fit-memory", opts->fit_memory,
                  "Peak memory points \"offloads:MB,...\" to fit (default: Mixtral 8x7B points)");
  cmd->add_option("--offloads", opts->offloads, "Offload counts to estimate memory for, e.g. 0..7");
  cmd->add_option("--config", opts->config, "key = value file with cost parameters");
  opts->cost.add_to(*cmd);
  cmd->callback([opts, &ctx] {
    ctx.action = [opts, &ctx] {
      const bool memory = opts->fit_memory.has_value() || !opts->offloads.empty();
      if (opts->log.empty() && opts->spec.empty() && !memory) {
        throw ConfigError("give at least one of --log, --spec, --fit-memory and --offloads");
      }
      const CostParams cost = opts->cost.resolve(load_config(opts->config));
      std::vector<MemoryPoint> points = mixtral_offload_memory_points();
      if (opts->fit_memory) points = parse_memory_points(*opts->fit_memory);
      std::vector<long> offloads;
      if (!opts->offloads.empty()) offloads = parse_int_list(opts->offloads);

      ordered_json j;
      j["params"] = params_json(cost);
      if (!opts->log.empty()) j["latency"] = to_json(estimate_latency(load_event_log(opts->log), cost));
      if (!opts->spec.empty()) {
        j["speculation"] = to_json(speculation_cost(load_speculation_trace(opts->spec), cost));
      }
      if (memory) {
        const MemoryModel model = fit_memory_model(points);
        ordered_json mj = to_json(model);
        ordered_json est = ordered_json::array();
        for (long o : offloads) {
          ordered_json e;
          e["offloads"] = o;
          e["peak_mb"] = estimate_peak_memory(model, double(o));
          est.push_back(std::move(e));
        }
        mj["estimates"] = std::move(est);
        j["memory"] = std::move(mj);
      }
      print_json(ctx.out, j);
    };
  });
}

void add_render(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string log;
    std::string spec;
    std::string trace;
    int layer = 0;
    int token = 0;
    std::string format = "svg";
    int cell_px = 12;
    std::string out;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand(
      "render", "Draw a cache trace (--log), a speculation (--spec) or a histogram (--trace)");
  cmd->add_option("--log", opts->log, "Event log: cache trace of one layer");
  cmd->add_option("--spec", opts->spec, "Speculation trace: one token across layers");
  cmd->add_option("--trace", opts->trace,
                  "Activation trace: histogram of one layer, or layer 0 marks with --spec");
  cmd->add_option("--layer", opts->layer, "Layer index, 0-based");
  cmd->add_option("--token", opts->token, "Token index for --spec");
  cmd->add_option("--format", opts->format, "svg or text")
      ->check(CLI::IsMember({"svg", "text"}));
  cmd->add_option("--cell-px", opts->cell_px, "Cell size in pixels")->check(CLI::Range(2, 200));
  cmd->add_option("--out", opts->out, "Output file (default: standard output)");
  cmd->callback([opts, &ctx] {
    ctx.action = [opts, &ctx] {
      if (!opts->log.empty() && !opts->spec.empty()) {
        throw ConfigError("--log and --spec are separate renders");
      }
      if (opts->log.empty() && opts->spec.empty() && opts->trace.empty()) {
        throw ConfigError("give one of --log, --spec and --trace");
      }
      if (!opts->log.empty() && !opts->trace.empty()) {
        throw ConfigError("--trace only combines with --spec");
      }
      RenderSpec rs;
      rs.cell_px = opts->cell_px;
      const bool svg = opts->format == "svg";

      std::string doc;
      ordered_json j;
      if (!opts->log.empty()) {
        const CacheEventLog log = load_event_log(opts->log);
        doc = svg ? render_cache_trace(log, opts->layer, rs) : render_cache_text(log, opts->layer);
        long activated = 0;
        long cached = 0;
        for (const auto& s : log.layer_steps(opts->layer)) {
          activated += static_cast<long>(s.activated().size());
          cached += static_cast<long>(s.cached().size());
        }
        j["kind"] = "cache";
        j["layer"] = opts->layer;
        j["activated_marks"] = activated;
        j["cached_marks"] = cached;
      } else if (!opts->spec.empty()) {
        const SpeculationTrace trace = load_speculation_trace(opts->spec);
        std::optional<ActivationTrace> acts;
        if (!opts->trace.empty()) acts = load_activation_trace(opts->trace);
        const ActivationTrace* ap = acts ? &*acts : nullptr;
        doc = svg ? render_speculation(trace, opts->token, rs, ap)
                  : render_speculation_text(trace, opts->token, ap);
        long tp = 0;
        long fp = 0;
        long fn = 0;
        for (int l = 1; l < trace.shape().num_layers; ++l) {
          const auto& r = trace.at(opts->token, l);
          const auto hit = static_cast<long>(intersection_size(r.guessed, r.actual));
          tp += hit;
          fp += static_cast<long>(r.guessed.size()) - hit;
          fn += static_cast<long>(r.actual.size()) - hit;
        }
        j["kind"] = "speculation";
        j["token"] = opts->token;
        j["tp_marks"] = tp;
        j["fp_marks"] = fp;
        j["fn_marks"] = fn;
      } else {
        if (!svg) throw ConfigError("histograms are only rendered as svg");
        const ActivationTrace trace = load_activation_trace(opts->trace);
        const auto hists = expert_histograms(trace);
        if (opts->layer < 0 || opts->layer >= static_cast<int>(hists.size())) {
          throw SelectionError("layer " + std::to_string(opts->layer) + " is not in the trace");
        }
        doc = render_histogram(hists[static_cast<std::size_t>(opts->layer)], rs);
        j["kind"] = "histogram";
        j["layer"] = opts->layer;
      }

      if (opts->out.empty()) {
        ctx.out << doc;
        return;
      }
      write_text_file(opts->out, doc);
      j["out"] = opts->out;
      j["format"] = opts->format;
      print_json(ctx.out, j);
    };
  });
}

}  // namespace moecache::cli
