// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "moecache/toy_moe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <string>

#include "moecache/error.hpp"

namespace moecache {

namespace {

// Independent generator streams derived from one user seed.
enum class Stream : std::uint32_t { kWeights = 0, kTokens = 1 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, double scale,
                              std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  // Column-major fill order is part of the seeded layout; keep it fixed.
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = scale * normal(rng);
  }
  return m;
}

}  // namespace

void ToyModelConfig::validate() const {
  shape.validate();
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be at least 1");
  if (!(mixing_scale >= 0.0) || !std::isfinite(mixing_scale)) {
    throw ConfigError("mixing_scale must be finite and non-negative");
  }
  if (!(skew >= 0.0) || !std::isfinite(skew)) throw ConfigError("skew must be finite and >= 0");
  if (num_tokens < 0) throw ConfigError("tokens must be non-negative");
}

Eigen::VectorXd ExpertFfn::apply(const Eigen::VectorXd& h) const {
  return down * (up * h).cwiseMax(0.0);
}

Eigen::VectorXd gate_probabilities(const Eigen::VectorXd& h, const GatingNetwork& gate) {
  if (h.size() != gate.weights.rows()) {
    throw ShapeError("hidden state has " + std::to_string(h.size()) + " values, gate expects " +
                     std::to_string(gate.weights.rows()));
  }
  if (gate.bias.size() != gate.weights.cols()) {
    throw ShapeError("gate bias has " + std::to_string(gate.bias.size()) + " entries, expected " +
                     std::to_string(gate.weights.cols()));
  }
  Eigen::VectorXd z = gate.weights.transpose() * h + gate.bias;
  if (!z.allFinite()) throw NumericError("non-finite gate logits");
  Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
  return p / p.sum();
}

std::vector<GateChoice> gate_select(const Eigen::VectorXd& h, const GatingNetwork& gate, int k) {
  const Eigen::VectorXd p = gate_probabilities(h, gate);
  if (k < 1 || k > p.size()) {
    throw ShapeError("top_k=" + std::to_string(k) + " outside [1, " + std::to_string(p.size()) +
                     "]");
  }
  std::vector<ExpertId> order(static_cast<std::size_t>(p.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](ExpertId a, ExpertId b) { return p(a) > p(b); });
  std::vector<GateChoice> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const ExpertId e = order[static_cast<std::size_t>(i)];
    out.push_back({e, p(e)});
  }
  return out;
}

ExpertSet speculate_next(const HiddenState& h_out_prev, const GatingNetwork& gate_next, int k) {
  ExpertSet guess;
  for (const auto& c : gate_select(h_out_prev.values, gate_next, k)) guess.insert(c.expert);
  return guess;
}

ToyModel::ToyModel(const ToyModelConfig& config) : config_(config) {
  config_.validate();
  const int d = config_.hidden_dim;
  const int num_experts = config_.shape.num_experts;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  auto rng = make_rng(config_.seed, Stream::kWeights);

  layers_.reserve(static_cast<std::size_t>(config_.shape.num_layers));
  for (int l = 0; l < config_.shape.num_layers; ++l) {
    ToyLayer layer;
    layer.mixing = normal_matrix(d, d, 1.0, rng);
    layer.gate.weights = normal_matrix(d, num_experts, inv_sqrt_d, rng);
    layer.gate.bias = normal_matrix(num_experts, 1, config_.skew, rng);
    layer.experts.reserve(static_cast<std::size_t>(num_experts));
    for (int e = 0; e < num_experts; ++e) {
      ExpertFfn f;
      f.up = normal_matrix(ffn_dim(), d, inv_sqrt_d, rng);
      f.down = normal_matrix(d, ffn_dim(), inv_sqrt_d, rng);
      layer.experts.push_back(std::move(f));
    }
    layers_.push_back(std::move(layer));
  }
}

ToyModel::ToyModel(const ToyModelConfig& config, std::vector<ToyLayer> layers)
    : config_(config), layers_(std::move(layers)) {
  config_.validate();
  const int d = config_.hidden_dim;
  if (static_cast<int>(layers_.size()) != config_.shape.num_layers) {
    throw ConfigError("expected " + std::to_string(config_.shape.num_layers) + " layers");
  }
  for (const auto& layer : layers_) {
    if (layer.mixing.rows() != d || layer.mixing.cols() != d ||
        layer.gate.weights.rows() != d ||
        layer.gate.weights.cols() != config_.shape.num_experts ||
        layer.gate.bias.size() != config_.shape.num_experts ||
        static_cast<int>(layer.experts.size()) != config_.shape.num_experts) {
      throw ConfigError("layer weights do not match the configured shape");
    }
    for (const auto& f : layer.experts) {
      if (f.up.cols() != d || f.down.rows() != d || f.down.cols() != f.up.rows()) {
        throw ConfigError("expert weights do not match hidden_dim");
      }
    }
  }
}

LayerOutput ToyModel::forward_token(const HiddenState& h_in, int layer) const {
  if (layer < 0 || layer >= config_.shape.num_layers) {
    throw SelectionError("layer " + std::to_string(layer) + " out of range");
  }
  const ToyLayer& w = layers_[static_cast<std::size_t>(layer)];
  if (h_in.values.size() != config_.hidden_dim) {
    throw ShapeError("hidden state has " + std::to_string(h_in.values.size()) +
                     " values, model expects " + std::to_string(config_.hidden_dim));
  }
  const Eigen::VectorXd mixed = h_in.values + config_.mixing_scale * (w.mixing * h_in.values);

  LayerOutput out;
  out.selection = gate_select(mixed, w.gate, config_.shape.top_k);
  Eigen::VectorXd h_out = mixed;
  for (const auto& c : out.selection) {
    h_out += c.weight * w.experts[static_cast<std::size_t>(c.expert)].apply(mixed);
    out.activated.insert(c.expert);
  }
  if (!h_out.allFinite()) throw NumericError("non-finite hidden state at layer " + std::to_string(layer));
  out.h_out = {std::move(h_out), layer};
  return out;
}

std::vector<Eigen::VectorXd> ToyModel::token_stream() const {
  auto rng = make_rng(config_.seed, Stream::kTokens);
  std::vector<Eigen::VectorXd> tokens;
  tokens.reserve(static_cast<std::size_t>(config_.num_tokens));
  for (int t = 0; t < config_.num_tokens; ++t) {
    tokens.push_back(normal_matrix(config_.hidden_dim, 1, 1.0, rng));
  }
  return tokens;
}

ModelRun run_model(const ToyModel& model) {
  const ModelShape& shape = model.config().shape;
  std::vector<ActivationRecord> activations;
  std::vector<SpeculationRecord> speculations;
  const auto tokens = model.token_stream();
  activations.reserve(tokens.size() * static_cast<std::size_t>(shape.num_layers));

  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const int token = static_cast<int>(t);
    HiddenState h{tokens[t], -1};
    for (int l = 0; l < shape.num_layers; ++l) {
      std::optional<ExpertSet> guess;
      if (l > 0) guess = speculate_next(h, model.layer(l).gate, shape.top_k);
      LayerOutput out = model.forward_token(h, l);
      if (guess) speculations.push_back({token, l, std::move(*guess), out.activated});
      activations.push_back({token, l, out.activated});
      h = std::move(out.h_out);
    }
  }
  return {ActivationTrace(shape, std::move(activations)),
          SpeculationTrace(shape, std::move(speculations))};
}

ModelRun run_model(const ToyModelConfig& config) { return run_model(ToyModel(config)); }

}  // namespace moecache
