// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <ostream>

#include "commands.hpp"
#include "moecache/error.hpp"
#include "moecache/toy_moe.hpp"
#include "moecache/tracegen.hpp"

namespace moecache::cli {

void print_json(std::ostream& out, const nlohmann::ordered_json& j) {
  out << j.dump(2) << '\n';
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << text;
  f.close();
  if (!f) throw IoError("failed writing " + path);
}

void GeneratorFlags::add_to(CLI::App& app, bool with_model) {
  if (with_model) {
    options_["model"] = app.add_option("--model", model, "Trace source: zipf, markov or toy")
                            ->check(CLI::IsMember({"zipf", "markov", "toy"}));
  }
  options_["layers"] = app.add_option("--layers", layers, "Number of MoE layers");
  options_["experts"] = app.add_option("--experts", experts, "Experts per layer");
  options_["top_k"] = app.add_option("--top-k", top_k, "Experts activated per token and layer");
  options_["tokens"] = app.add_option("--tokens", tokens, "Number of tokens");
  options_["skew"] = app.add_option(
      "--skew", skew, "Zipf exponent (zipf, markov) or gate bias scale (toy)");
  if (with_model) {
    options_["repeat_prob"] =
        app.add_option("--repeat-prob", repeat_prob, "Markov keep probability per expert");
    options_["shared_ranking"] =
        app.add_flag("--shared-ranking", shared_ranking, "One Zipf ranking for every layer");
  }
  options_["hidden_dim"] = app.add_option("--hidden-dim", hidden_dim, "Toy model hidden size");
  options_["mixing_scale"] =
      app.add_option("--mixing-scale", mixing_scale, "Toy model perturbation scale (alpha)");
  options_["seed"] = app.add_option("--seed", seed, "Random seed (default 42)");
  app.add_option("--config", config, "key = value file with model and cost parameters");
}

bool GeneratorFlags::given(const std::string& flag) const {
  auto it = options_.find(flag);
  return it != options_.end() && it->second->count() > 0;
}

void GeneratorSpec::validate() const {
  if (model == "toy") {
    ToyModelConfig c;
    c.shape = shape;
    c.num_tokens = tokens;
    c.hidden_dim = hidden_dim;
    c.mixing_scale = mixing_scale;
    c.skew = skew;
    c.validate();
    return;
  }
  ZipfParams z;
  z.shape = shape;
  z.num_tokens = tokens;
  z.skew_exponent = skew;
  z.validate();
  if (model == "markov") {
    MarkovParams m{z, repeat_prob};
    m.validate();
  } else if (model != "zipf") {
    throw ConfigError("unknown model '" + model + "'");
  }
}

GeneratorSpec resolve(const GeneratorFlags& flags, const KvConfig& kv) {
  auto pick_int = [&](const char* key, int value) {
    return flags.given(key) ? value : static_cast<int>(kv.get_int(key, value));
  };
  auto pick_double = [&](const char* key, double value) {
    return flags.given(key) ? value : kv.get_double(key, value);
  };
  GeneratorSpec s;
  s.model = flags.given("model") ? flags.model : kv.get_string("model", flags.model);
  s.shape.num_layers = pick_int("layers", flags.layers);
  s.shape.num_experts = pick_int("experts", flags.experts);
  s.shape.top_k = pick_int("top_k", flags.top_k);
  s.tokens = pick_int("tokens", flags.tokens);
  s.skew = pick_double("skew", flags.skew);
  s.repeat_prob = pick_double("repeat_prob", flags.repeat_prob);
  s.per_layer_permutation = !(flags.given("shared_ranking")
                                  ? flags.shared_ranking
                                  : kv.get_bool("shared_ranking", flags.shared_ranking));
  s.hidden_dim = pick_int("hidden_dim", flags.hidden_dim);
  s.mixing_scale = pick_double("mixing_scale", flags.mixing_scale);
  s.seed = flags.given("seed") ? flags.seed : kv.get_u64("seed", flags.seed);
  s.validate();
  return s;
}

Generated generate(const GeneratorSpec& spec) {
  if (spec.model == "toy") {
    ToyModelConfig c;
    c.shape = spec.shape;
    c.num_tokens = spec.tokens;
    c.hidden_dim = spec.hidden_dim;
    c.mixing_scale = spec.mixing_scale;
    c.skew = spec.skew;
    c.seed = spec.seed;
    ModelRun run = run_model(c);
    return {std::move(run.activations), std::move(run.speculations)};
  }
  ZipfParams z;
  z.shape = spec.shape;
  z.num_tokens = spec.tokens;
  z.skew_exponent = spec.skew;
  z.per_layer_permutation = spec.per_layer_permutation;
  z.seed = spec.seed;
  if (spec.model == "markov") return {gen_markov(MarkovParams{z, spec.repeat_prob}), {}};
  return {gen_zipf(z), {}};
}

void CostFlags::add_to(CLI::App& app) {
  app.add_option("--expert-bytes", expert_bytes, "Bytes moved per expert load");
  app.add_option("--bandwidth", bandwidth, "Host-to-device bandwidth, bytes per second");
  app.add_option("--compute", compute, "Compute seconds per layer and token");
  app.add_option("--overlap", overlap, "Fraction of transfer hidden behind compute");
}

CostParams CostFlags::resolve(const KvConfig& kv) const {
  CostParams p = cost_params_from(kv);
  if (expert_bytes) p.expert_bytes = *expert_bytes;
  if (bandwidth) p.bandwidth_bytes_per_s = *bandwidth;
  if (compute) p.compute_s_per_layer = *compute;
  if (overlap) p.overlap = *overlap;
  p.validate();
  return p;
}

KvConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  KvConfig kv = KvConfig::load(path);
  std::vector<std::string_view> allowed = model_config_keys();
  allowed.insert(allowed.end(), {"model", "repeat_prob", "shared_ranking"});
  kv.require_known(allowed);
  return kv;
}

int resolve_cache_size(const std::optional<int>& cache_size, const std::optional<int>& offloads,
                       const ModelShape& shape) {
  if (cache_size.has_value() == offloads.has_value()) {
    throw ConfigError("give exactly one of --cache-size and --offloads");
  }
  if (offloads) return offloads_to_cache_size(*offloads, shape);
  if (*cache_size < shape.top_k) {
    throw ConfigError("cache size " + std::to_string(*cache_size) + " is below top_k " +
                      std::to_string(shape.top_k));
  }
  return *cache_size;
}

}  // namespace moecache::cli
