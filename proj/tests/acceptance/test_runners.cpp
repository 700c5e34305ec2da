// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "test_runners.hpp"

#include <random>
#include <sstream>

#include "cli/cli.hpp"
#include "moecache/cache_sim.hpp"
#include "moecache/error.hpp"
#include "moecache/render.hpp"
#include "oracles.hpp"

namespace moecache::acceptance {

using nlohmann::ordered_json;

namespace {

oracle::RefPolicy reference_for(const PolicyKind& k) {
  if (std::holds_alternative<LruPolicy>(k)) return oracle::RefPolicy::Lru;
  if (std::holds_alternative<LfuPolicy>(k)) return oracle::RefPolicy::Lfu;
  if (std::holds_alternative<OptPolicy>(k)) return oracle::RefPolicy::Opt;
  throw ConfigError("no reference replay for " + to_string(k));
}

bool same_steps(const std::vector<oracle::RefStep>& a, const std::vector<oracle::RefStep>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].cached != b[i].cached || a[i].hit != b[i].hit || a[i].miss != b[i].miss ||
        a[i].evict != b[i].evict) {
      return false;
    }
  }
  return true;
}

// Every single-layer trace with top-1 routing over E experts and T tokens.
ordered_json run_policy_oracle(const KvConfig& p) {
  p.require_known({"experts", "tokens", "cache_sizes", "policies"});
  const int experts = static_cast<int>(p.get_int("experts", 4));
  const int tokens = static_cast<int>(p.get_int("tokens", 6));
  std::vector<long> sizes = p.get_int_list("cache_sizes", {});
  if (sizes.empty()) {
    for (int c = 1; c <= experts; ++c) sizes.push_back(c);
  }
  std::vector<PolicyKind> policies;
  const std::string names = p.get_string("policies", "lru,lfu");
  std::size_t start = 0;
  while (start <= names.size()) {
    const auto comma = std::min(names.find(',', start), names.size());
    policies.push_back(parse_policy(std::string_view(names).substr(start, comma - start)));
    start = comma + 1;
  }

  long total = 1;
  for (int t = 0; t < tokens; ++t) total *= experts;

  const ModelShape shape{1, experts, 1};
  long mismatched_traces = 0;
  long steps = 0;
  for (long code = 0; code < total; ++code) {
    long rest = code;
    oracle::Stream stream;
    std::vector<ActivationRecord> records;
    for (int t = 0; t < tokens; ++t) {
      const int e = static_cast<int>(rest % experts);
      rest /= experts;
      stream.push_back({e});
      records.push_back({t, 0, ExpertSet{e}});
    }
    const ActivationTrace trace(shape, std::move(records));
    bool bad = false;
    for (const auto& policy : policies) {
      for (long c : sizes) {
        const auto got = oracle::steps_of(
            simulate(trace, {policy, static_cast<int>(c), 0, std::nullopt}), 0);
        const auto want = oracle::replay(stream, static_cast<int>(c), reference_for(policy));
        steps += static_cast<long>(got.size());
        bad = bad || !same_steps(got, want);
      }
    }
    if (bad) ++mismatched_traces;
  }

  ordered_json j;
  j["traces"] = total;
  j["cache_sizes"] = sizes;
  j["steps_compared"] = steps;
  j["mismatched_traces"] = mismatched_traces;
  return j;
}

ordered_json run_render_conservation(const KvConfig& p) {
  p.require_known({"logs", "speculations", "seed"});
  const long logs = p.get_int("logs", 20);
  const long speculations = p.get_int("speculations", 20);
  std::mt19937_64 rng(p.get_u64("seed", 3));
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  long activated_mismatches = 0;
  long cached_mismatches = 0;
  long activated_marks = 0;
  long cached_marks = 0;
  const std::vector<PolicyKind> policies{LruPolicy{}, LfuPolicy{}, OptPolicy{}};
  for (long i = 0; i < logs; ++i) {
    const ModelShape shape = oracle::random_shape(rng, 4, 10, 3);
    const auto trace = oracle::random_activation_trace(shape, pick(0, 40), rng);
    const int capacity = pick(shape.top_k, shape.num_experts);
    const auto& policy = policies[static_cast<std::size_t>(pick(0, 2))];
    const auto log = simulate(trace, {policy, capacity, 0, std::nullopt});
    const int layer = pick(0, shape.num_layers - 1);

    long want_a = 0;
    long want_s = 0;
    for (const auto& s : log.layer_steps(layer)) {
      want_a += static_cast<long>(s.activated().size());
      want_s += static_cast<long>(s.cached().size());
    }
    auto counts = oracle::count_rect_classes(render_cache_trace(log, layer));
    if (counts["activated"] != want_a) ++activated_mismatches;
    if (counts["cached"] != want_s) ++cached_mismatches;
    activated_marks += counts["activated"];
    cached_marks += counts["cached"];
  }

  long fp_fn_mismatches = 0;
  long mark_mismatches = 0;
  for (long i = 0; i < speculations; ++i) {
    ModelShape shape = oracle::random_shape(rng, 8, 10, 3);
    shape.num_layers = std::max(shape.num_layers, 2);
    const int tokens = pick(1, 10);
    const auto spec = oracle::random_speculation_trace(shape, tokens, rng);
    const auto acts = oracle::random_activation_trace(shape, tokens, rng);
    const int token = pick(0, tokens - 1);
    auto counts = oracle::count_rect_classes(render_speculation(spec, token, {}, &acts));

    long tp = 0;
    long fp = 0;
    long fn = 0;
    for (int l = 1; l < shape.num_layers; ++l) {
      const auto& r = spec.at(token, l);
      const auto both = static_cast<long>(intersection_size(r.guessed, r.actual));
      tp += both;
      fp += static_cast<long>(r.guessed.size()) - both;
      fn += static_cast<long>(r.actual.size()) - both;
    }
    if (counts["fp"] != counts["fn"]) ++fp_fn_mismatches;
    if (counts["tp"] != tp || counts["fp"] != fp || counts["fn"] != fn ||
        counts["fn-excluded"] != shape.top_k) {
      ++mark_mismatches;
    }
  }

  ordered_json j;
  j["logs"] = logs;
  j["speculations"] = speculations;
  j["activated_marks"] = activated_marks;
  j["cached_marks"] = cached_marks;
  j["activated_mismatches"] = activated_mismatches;
  j["cached_mismatches"] = cached_mismatches;
  j["fp_fn_mismatches"] = fp_fn_mismatches;
  j["speculation_mark_mismatches"] = mark_mismatches;
  return j;
}

// One pass of the command-line pipeline inside `dir`. Outputs that name
// paths (gen-trace, simulate) are not compared since the directories differ.
struct PipelineRun {
  std::vector<std::pair<std::string, std::string>> files;
  long failures = 0;
};

PipelineRun run_pipeline(const oracle::TempDir& dir, const std::string& model, const KvConfig& p) {
  PipelineRun run;
  auto cli = [&](std::vector<std::string> args, const std::string& capture = {}) {
    std::ostringstream out;
    std::ostringstream err;
    if (cli::run_cli(args, out, err) != cli::kOk) ++run.failures;
    if (!capture.empty()) run.files.emplace_back(capture, out.str());
  };
  auto path = [&](const std::string& name) { return (dir / name).string(); };
  const std::string layers = std::to_string(p.get_int("layers", 4));
  const std::string tokens = std::to_string(p.get_int("tokens", 128));
  const std::string seed = std::to_string(p.get_u64("seed", 42));

  std::vector<std::string> gen{"gen-trace", "--model", model,  "--layers", layers,
                               "--tokens",  tokens,    "--seed", seed,     "--out",
                               path("trace.jsonl")};
  if (model == "toy") {
    gen.push_back("--out-spec");
    gen.push_back(path("spec.jsonl"));
  }
  cli(gen);
  cli({"simulate", "--trace", path("trace.jsonl"), "--policy", "lfu", "--cache-size", "4",
       "--warmup", "8", "--out", path("events.jsonl")});
  cli({"metrics", "--log", path("events.jsonl")}, "metrics-log.json");
  cli({"metrics", "--trace", path("trace.jsonl")}, "metrics-trace.json");
  cli({"render", "--log", path("events.jsonl"), "--layer", "0"}, "cache.svg");
  cli({"render", "--log", path("events.jsonl"), "--layer", "0", "--format", "text"}, "cache.txt");
  if (model == "toy") {
    cli({"metrics", "--spec", path("spec.jsonl")}, "metrics-spec.json");
    cli({"render", "--spec", path("spec.jsonl"), "--trace", path("trace.jsonl"), "--token", "3"},
        "spec.svg");
  }
  for (const char* name : {"trace.jsonl", "events.jsonl", "spec.jsonl"}) {
    if (std::filesystem::exists(dir / name)) run.files.emplace_back(name, oracle::read_file(dir / name));
  }
  return run;
}

ordered_json run_pipeline_determinism(const KvConfig& p) {
  p.require_known({"models", "layers", "tokens", "seed"});
  const std::string models = p.get_string("models", "zipf,markov,toy");
  long compared = 0;
  long differing = 0;
  long failures = 0;
  ordered_json differing_names = ordered_json::array();
  std::size_t start = 0;
  while (start <= models.size()) {
    const auto comma = std::min(models.find(',', start), models.size());
    const std::string model = models.substr(start, comma - start);
    start = comma + 1;
    oracle::TempDir a;
    oracle::TempDir b;
    const PipelineRun ra = run_pipeline(a, model, p);
    const PipelineRun rb = run_pipeline(b, model, p);
    failures += ra.failures + rb.failures;
    if (ra.files.size() != rb.files.size()) {
      ++differing;
      continue;
    }
    for (std::size_t i = 0; i < ra.files.size(); ++i) {
      ++compared;
      if (ra.files[i] != rb.files[i]) {
        ++differing;
        differing_names.push_back(model + "/" + ra.files[i].first);
      }
    }
  }
  ordered_json j;
  j["files_compared"] = compared;
  j["differing_files"] = differing;
  j["differing"] = std::move(differing_names);
  j["exit_failures"] = failures;
  return j;
}

}  // namespace

void add_test_runners(RunnerRegistry& registry) {
  registry.add("policy-oracle", run_policy_oracle);
  registry.add("render-conservation", run_render_conservation);
  registry.add("pipeline-determinism", run_pipeline_determinism);
}

}  // namespace moecache::acceptance
