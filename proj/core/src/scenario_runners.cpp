// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

// Runners for the reproduction scenarios shipped in scenarios/. Each runner
// reads its parameters from the scenario file, executes a pipeline and returns
// the metrics its expectations are evaluated against.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "moecache/cache_sim.hpp"
#include "moecache/cost_model.hpp"
#include "moecache/error.hpp"
#include "moecache/metrics.hpp"
#include "moecache/policy.hpp"
#include "moecache/scenario.hpp"
#include "moecache/toy_moe.hpp"
#include "moecache/trace_io.hpp"
#include "moecache/tracegen.hpp"

namespace moecache {

using nlohmann::ordered_json;

namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<PolicyKind> policy_list(const KvConfig& p, std::string_view fallback) {
  std::vector<PolicyKind> out;
  std::string text = p.get_string("policies", fallback);
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_policy(item));
  if (out.empty()) throw ConfigError("no policies given");
  return out;
}

double mean(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
}

// fp == fn and precision == recall, on the totals and on every layer.
bool speculation_identity_holds(const SpeculationMetrics& m, long& mismatched_ratios) {
  bool counts_ok = m.total.fp == m.total.fn;
  auto ratios_equal = [](const SpeculationCounts& c) {
    return c.precision().value() == c.recall().value();
  };
  if (!ratios_equal(m.total)) ++mismatched_ratios;
  for (const auto& l : m.per_layer) {
    counts_ok = counts_ok && l.counts.fp == l.counts.fn;
    if (!ratios_equal(l.counts)) ++mismatched_ratios;
  }
  return counts_ok;
}

ordered_json run_speculation_identity(const KvConfig& p) {
  p.require_known({"random_traces", "max_layers", "max_experts", "max_tokens", "seed",
                   "toy_seeds", "toy_alphas", "toy_layers", "toy_tokens"});
  const long random_traces = p.get_int("random_traces", 1000);
  const int max_layers = static_cast<int>(p.get_int("max_layers", 8));
  const int max_experts = static_cast<int>(p.get_int("max_experts", 16));
  const int max_tokens = static_cast<int>(p.get_int("max_tokens", 24));
  std::mt19937_64 rng(p.get_u64("seed", 7));

  long fp_fn_mismatches = 0;
  long ratio_mismatches = 0;
  long records = 0;
  for (long i = 0; i < random_traces; ++i) {
    SpeculationNoiseParams sp;
    sp.shape.num_layers = uniform_int(rng, 1, max_layers);
    sp.shape.num_experts = uniform_int(rng, 1, max_experts);
    sp.shape.top_k = uniform_int(rng, 1, std::min(sp.shape.num_experts, 4));
    sp.num_tokens = uniform_int(rng, 0, max_tokens);
    sp.keep_prob = uniform_real(rng, 0.0, 1.0);
    sp.seed = rng();
    const auto trace = gen_speculation(sp);
    records += static_cast<long>(trace.records().size());
    if (!speculation_identity_holds(speculation_metrics(trace), ratio_mismatches)) {
      ++fp_fn_mismatches;
    }
  }

  long toy_runs = 0;
  for (long seed : p.get_int_list("toy_seeds", {1, 2, 3, 4, 5})) {
    for (double alpha : p.get_double_list("toy_alphas", {0.0, 0.1, 1.0})) {
      ToyModelConfig cfg;
      cfg.shape.num_layers = static_cast<int>(p.get_int("toy_layers", 32));
      cfg.num_tokens = static_cast<int>(p.get_int("toy_tokens", 32));
      cfg.mixing_scale = alpha;
      cfg.seed = static_cast<std::uint64_t>(seed);
      const auto run = run_model(cfg);
      records += static_cast<long>(run.speculations.records().size());
      if (!speculation_identity_holds(speculation_metrics(run.speculations), ratio_mismatches)) {
        ++fp_fn_mismatches;
      }
      ++toy_runs;
    }
  }

  ordered_json j;
  j["random_traces"] = random_traces;
  j["toy_runs"] = toy_runs;
  j["records_checked"] = records;
  j["fp_fn_mismatches"] = fp_fn_mismatches;
  j["precision_recall_mismatches"] = ratio_mismatches;
  return j;
}

ordered_json run_cache_ratio(const KvConfig& p) {
  p.require_known({"pairs", "seeds", "layers", "experts", "tokens", "skew", "policies"});
  const auto pairs = parse_memory_points(p.get_string("pairs", "4:2,6:2,8:2,4:1"));
  const auto seeds = p.get_int_list("seeds", {1, 2, 3, 4, 5});
  const auto policies = policy_list(p, "lru,lfu,opt");

  double max_rel_error = 0.0;
  long runs = 0;
  long runs_without_full_steps = 0;
  long identity_violations = 0;
  ordered_json per_pair;
  for (const auto& pair : pairs) {
    const int capacity = static_cast<int>(pair.offloads);
    const int top_k = static_cast<int>(pair.peak_mb);
    std::vector<double> precisions;
    std::vector<double> recalls;
    for (long seed : seeds) {
      ZipfParams zp;
      zp.shape = {static_cast<int>(p.get_int("layers", 4)),
                  std::max(static_cast<int>(p.get_int("experts", 8)), capacity), top_k};
      zp.num_tokens = static_cast<int>(p.get_int("tokens", 256));
      zp.skew_exponent = p.get_double("skew", 1.0);
      zp.seed = static_cast<std::uint64_t>(seed);
      const auto trace = gen_zipf(zp);
      for (const auto& policy : policies) {
        const auto log = simulate(trace, {policy, capacity, 0, std::nullopt});
        ++runs;

        // Σ hits = recall·Σ|A| = precision·Σ|S| on the unrestricted counts.
        const auto all = cache_metrics(log).total;
        const auto pr = all.precision().value();
        const auto rc = all.recall().value();
        if (pr && rc &&
            std::abs(*rc * double(all.activated_total) - *pr * double(all.cached_total)) >
                1e-9 * double(all.hits + 1)) {
          ++identity_violations;
        }

        const auto full = cache_metrics(log, {std::nullopt, true}).total;
        if (full.steps == 0) {
          ++runs_without_full_steps;
          continue;
        }
        const double precision = *full.precision().value();
        const double recall = *full.recall().value();
        const double predicted = double(capacity) / double(top_k) * precision;
        const double rel = predicted == 0.0 ? (recall == 0.0 ? 0.0 : 1.0)
                                            : std::abs(recall - predicted) / predicted;
        max_rel_error = std::max(max_rel_error, rel);
        precisions.push_back(precision);
        recalls.push_back(recall);
      }
    }
    ordered_json pj;
    pj["cache_size"] = capacity;
    pj["top_k"] = top_k;
    pj["mean_precision"] = mean(precisions);
    pj["mean_recall"] = mean(recalls);
    pj["expected_ratio"] = double(capacity) / double(top_k);
    per_pair[std::to_string(capacity) + ":" + std::to_string(top_k)] = std::move(pj);
  }

  ordered_json j;
  j["runs"] = runs;
  j["runs_without_full_steps"] = runs_without_full_steps;
  j["max_rel_error"] = max_rel_error;
  j["hit_identity_violations"] = identity_violations;
  j["pairs"] = std::move(per_pair);
  return j;
}

ordered_json run_alpha_sweep(const KvConfig& p) {
  p.require_known({"alphas", "seeds", "layers", "experts", "top_k", "hidden_dim", "tokens",
                   "skew"});
  const auto alphas = p.get_double_list("alphas", {0.0, 0.05, 0.1, 0.5, 1.0});
  const auto seeds = p.get_int_list("seeds", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  ToyModelConfig base;
  base.shape = {static_cast<int>(p.get_int("layers", 32)), static_cast<int>(p.get_int("experts", 8)),
                static_cast<int>(p.get_int("top_k", 2))};
  base.hidden_dim = static_cast<int>(p.get_int("hidden_dim", 16));
  base.num_tokens = static_cast<int>(p.get_int("tokens", 64));
  base.skew = p.get_double("skew", 1.0);
  if (base.shape.num_layers < 2) throw ConfigError("alpha sweep needs at least two layers");

  std::vector<double> means;
  double alpha_zero_min = 1.0;
  long alpha_zero_wrong = 0;
  long alpha_zero_runs = 0;
  for (double alpha : alphas) {
    std::vector<double> accuracies;
    for (long seed : seeds) {
      ToyModelConfig cfg = base;
      cfg.mixing_scale = alpha;
      cfg.seed = static_cast<std::uint64_t>(seed);
      const auto m = speculation_metrics(run_model(cfg).speculations);
      const double acc = m.total.precision().value().value_or(0.0);
      accuracies.push_back(acc);
      if (alpha == 0.0) {
        ++alpha_zero_runs;
        alpha_zero_min = std::min(alpha_zero_min, acc);
        alpha_zero_wrong += m.total.fp;
      }
    }
    means.push_back(mean(accuracies));
  }
  long violations = 0;
  for (std::size_t i = 1; i < means.size(); ++i) {
    if (means[i] > means[i - 1]) ++violations;
  }

  ordered_json j;
  j["alphas"] = alphas;
  j["mean_accuracy"] = means;
  j["seeds"] = seeds.size();
  j["alpha_zero_runs"] = alpha_zero_runs;
  j["alpha_zero_min_accuracy"] = alpha_zero_min;
  j["alpha_zero_wrong_guesses"] = alpha_zero_wrong;
  j["monotone_violations"] = violations;
  return j;
}

ordered_json run_opt_dominance(const KvConfig& p) {
  p.require_known({"traces", "cache_sizes", "layers", "tokens", "seed"});
  const long traces = p.get_int("traces", 100);
  const auto sizes = p.get_int_list("cache_sizes", {2, 3, 4});
  std::mt19937_64 rng(p.get_u64("seed", 11));

  long instances = 0;
  long vs_lru = 0;
  long vs_lfu = 0;
  long min_margin_lru = std::numeric_limits<long>::max();
  long min_margin_lfu = std::numeric_limits<long>::max();
  for (long i = 0; i < traces; ++i) {
    MarkovParams mp;
    mp.base.shape.num_layers = static_cast<int>(p.get_int("layers", 2));
    mp.base.shape.num_experts = uniform_int(rng, 4, 8);
    mp.base.shape.top_k = uniform_int(rng, 1, 2);
    mp.base.num_tokens = static_cast<int>(p.get_int("tokens", 64));
    mp.base.skew_exponent = uniform_real(rng, 0.0, 2.0);
    mp.base.seed = rng();
    mp.repeat_prob = uniform_real(rng, 0.0, 0.8);
    const auto trace = gen_markov(mp);
    for (long c : sizes) {
      const int capacity = static_cast<int>(c);
      if (capacity < trace.shape().top_k) continue;
      auto hits = [&](const PolicyKind& k) {
        return cache_metrics(simulate(trace, {k, capacity, 0, std::nullopt})).total.hits;
      };
      const long opt = hits(OptPolicy{});
      const long lru = hits(LruPolicy{});
      const long lfu = hits(LfuPolicy{});
      ++instances;
      if (opt < lru) ++vs_lru;
      if (opt < lfu) ++vs_lfu;
      min_margin_lru = std::min(min_margin_lru, opt - lru);
      min_margin_lfu = std::min(min_margin_lfu, opt - lfu);
    }
  }

  ordered_json j;
  j["instances"] = instances;
  j["violations_vs_lru"] = vs_lru;
  j["violations_vs_lfu"] = vs_lfu;
  j["min_margin_vs_lru"] = instances ? min_margin_lru : 0;
  j["min_margin_vs_lfu"] = instances ? min_margin_lfu : 0;
  return j;
}

ordered_json run_policy_comparison(const KvConfig& p) {
  p.require_known({"policies", "seeds", "layers", "experts", "top_k", "tokens", "skew",
                   "cache_size", "generator", "repeat_prob"});
  const auto policies = policy_list(p, "lru,lfu");
  const auto seeds = p.get_int_list("seeds", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15,
                                              16, 17, 18, 19, 20});
  const std::string generator = p.get_string("generator", "zipf");
  if (generator != "zipf" && generator != "markov") {
    throw ConfigError("generator must be zipf or markov");
  }
  MarkovParams mp;
  mp.base.shape = {static_cast<int>(p.get_int("layers", 32)),
                   static_cast<int>(p.get_int("experts", 8)),
                   static_cast<int>(p.get_int("top_k", 2))};
  mp.base.num_tokens = static_cast<int>(p.get_int("tokens", 512));
  mp.base.skew_exponent = p.get_double("skew", 1.0);
  mp.repeat_prob = p.get_double("repeat_prob", 0.3);
  const int capacity = static_cast<int>(p.get_int("cache_size", 4));

  std::vector<std::vector<double>> hit_rates(policies.size());
  std::vector<std::vector<double>> precisions(policies.size());
  std::vector<std::vector<double>> recalls(policies.size());
  for (long seed : seeds) {
    mp.base.seed = static_cast<std::uint64_t>(seed);
    const auto trace = generator == "zipf" ? gen_zipf(mp.base) : gen_markov(mp);
    for (std::size_t i = 0; i < policies.size(); ++i) {
      const auto m = cache_metrics(simulate(trace, {policies[i], capacity, 0, std::nullopt}));
      hit_rates[i].push_back(m.total.hit_rate());
      precisions[i].push_back(m.total.precision().value().value_or(0.0));
      recalls[i].push_back(m.total.recall().value().value_or(0.0));
    }
  }

  ordered_json j;
  j["seeds"] = seeds.size();
  for (std::size_t i = 0; i < policies.size(); ++i) {
    ordered_json pj;
    pj["mean_hit_rate"] = mean(hit_rates[i]);
    pj["mean_precision"] = mean(precisions[i]);
    pj["mean_recall"] = mean(recalls[i]);
    pj["hit_rates"] = hit_rates[i];
    j[to_string(policies[i])] = std::move(pj);
  }
  if (policies.size() >= 2) j["margin"] = mean(hit_rates[1]) - mean(hit_rates[0]);
  return j;
}

ordered_json run_memory_fit(const KvConfig& p) {
  p.require_known({"points", "holdout"});
  const auto points = p.has("points") ? parse_memory_points(*p.get("points"))
                                      : mixtral_offload_memory_points();
  const double holdout = p.get_double("holdout", 5.0);
  const auto model = fit_memory_model(points);

  std::vector<MemoryPoint> rest;
  std::optional<MemoryPoint> held;
  for (const auto& pt : points) {
    if (pt.offloads == holdout) {
      held = pt;
    } else {
      rest.push_back(pt);
    }
  }
  if (!held) throw ConfigError("holdout offload value not among the points");
  const double predicted = estimate_peak_memory(fit_memory_model(rest), holdout);

  double max_residual = 0.0;
  for (double r : model.residuals) max_residual = std::max(max_residual, std::abs(r));
  ordered_json j;
  j["slope"] = model.slope_mb_per_offload;
  j["intercept"] = model.intercept_mb;
  j["max_abs_residual"] = max_residual;
  j["holdout_offloads"] = holdout;
  j["holdout_measured"] = held->peak_mb;
  j["holdout_predicted"] = predicted;
  j["holdout_rel_error"] = std::abs(predicted - held->peak_mb) / held->peak_mb;
  return j;
}

ordered_json run_compulsory_misses(const KvConfig& p) {
  p.require_known({"traces", "policies", "layers", "tokens", "seed"});
  const long traces = p.get_int("traces", 100);
  const auto policies = policy_list(p, "lru,lfu,lfu-aged:0.5:16,opt");
  std::mt19937_64 rng(p.get_u64("seed", 13));

  long instances = 0;
  long mismatches = 0;
  for (long i = 0; i < traces; ++i) {
    ZipfParams zp;
    zp.shape.num_layers = static_cast<int>(p.get_int("layers", 4));
    zp.shape.num_experts = uniform_int(rng, 2, 10);
    zp.shape.top_k = uniform_int(rng, 1, std::min(zp.shape.num_experts, 3));
    zp.num_tokens = static_cast<int>(p.get_int("tokens", 64));
    zp.skew_exponent = uniform_real(rng, 0.0, 2.0);
    zp.seed = rng();
    const auto trace = gen_zipf(zp);
    std::vector<long> distinct;
    for (int l = 0; l < zp.shape.num_layers; ++l) {
      ExpertSet seen;
      for (const auto& s : trace.layer_stream(l)) seen = set_union(seen, s);
      distinct.push_back(static_cast<long>(seen.size()));
    }
    for (const auto& policy : policies) {
      const auto m = cache_metrics(simulate(trace, {policy, zp.shape.num_experts, 0, std::nullopt}));
      ++instances;
      for (const auto& l : m.per_layer) {
        if (l.counts.misses != distinct[static_cast<std::size_t>(l.layer)]) {
          ++mismatches;
          break;
        }
      }
    }
  }
  ordered_json j;
  j["instances"] = instances;
  j["mismatches"] = mismatches;
  return j;
}

ordered_json run_trace_roundtrip(const KvConfig& p) {
  p.require_known({"traces", "seed", "max_layers", "max_experts", "max_tokens"});
  const long traces = p.get_int("traces", 1000);
  const int max_layers = static_cast<int>(p.get_int("max_layers", 6));
  const int max_experts = static_cast<int>(p.get_int("max_experts", 12));
  const int max_tokens = static_cast<int>(p.get_int("max_tokens", 16));
  std::mt19937_64 rng(p.get_u64("seed", 17));

  long byte_mismatches = 0;
  long value_mismatches = 0;
  for (long i = 0; i < traces; ++i) {
    ModelShape shape;
    shape.num_layers = uniform_int(rng, 1, max_layers);
    shape.num_experts = uniform_int(rng, 1, max_experts);
    shape.top_k = uniform_int(rng, 1, shape.num_experts);
    const int tokens = uniform_int(rng, 0, max_tokens);

    std::ostringstream first;
    std::ostringstream second;
    bool same_value = false;
    if (i % 2 == 0) {
      ZipfParams zp{shape, tokens, uniform_real(rng, 0.0, 2.0), true, rng()};
      const auto trace = gen_zipf(zp);
      write_trace(first, trace);
      std::istringstream in(first.str());
      const auto back = read_activation_trace(in);
      same_value = back == trace;
      write_trace(second, back);
    } else {
      const auto trace = gen_speculation({shape, tokens, uniform_real(rng, 0.0, 1.0), rng()});
      write_trace(first, trace);
      std::istringstream in(first.str());
      const auto back = read_speculation_trace(in);
      same_value = back == trace;
      write_trace(second, back);
    }
    if (first.str() != second.str()) ++byte_mismatches;
    if (!same_value) ++value_mismatches;
  }
  ordered_json j;
  j["traces"] = traces;
  j["byte_mismatches"] = byte_mismatches;
  j["value_mismatches"] = value_mismatches;
  return j;
}

}  // namespace

RunnerRegistry RunnerRegistry::builtin() {
  RunnerRegistry r;
  r.add("speculation-identity", run_speculation_identity);
  r.add("cache-ratio", run_cache_ratio);
  r.add("alpha-sweep", run_alpha_sweep);
  r.add("opt-dominance", run_opt_dominance);
  r.add("policy-comparison", run_policy_comparison);
  r.add("memory-fit", run_memory_fit);
  r.add("compulsory-misses", run_compulsory_misses);
  r.add("trace-roundtrip", run_trace_roundtrip);
  return r;
}

}  // namespace moecache
