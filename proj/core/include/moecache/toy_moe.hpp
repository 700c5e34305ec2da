// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "moecache/trace.hpp"

namespace moecache {

/// Desk-scale MoE stack used to produce activation and speculation traces.
struct ToyModelConfig {
  ModelShape shape;
  int hidden_dim = 16;
  /// Scale of the per-layer random perturbation that stands in for attention.
  double mixing_scale = 0.1;
  /// Scale of the per-layer gate bias that favours some experts.
  double skew = 1.0;
  std::uint64_t seed = 42;
  int num_tokens = 64;

  void validate() const;
};

/// Linear router: logits = weightsᵀ·h + bias.
struct GatingNetwork {
  Eigen::MatrixXd weights;  // hidden_dim x num_experts
  Eigen::VectorXd bias;     // num_experts

  int hidden_dim() const { return static_cast<int>(weights.rows()); }
  int num_experts() const { return static_cast<int>(weights.cols()); }
};

struct HiddenState {
  Eigen::VectorXd values;
  /// Layer whose output this is; -1 for the token embedding.
  int layer = -1;
};

/// Two-layer ReLU feed-forward expert.
struct ExpertFfn {
  Eigen::MatrixXd up;    // ffn_dim x hidden_dim
  Eigen::MatrixXd down;  // hidden_dim x ffn_dim

  Eigen::VectorXd apply(const Eigen::VectorXd& h) const;
};

struct ToyLayer {
  Eigen::MatrixXd mixing;  // hidden_dim x hidden_dim
  GatingNetwork gate;
  std::vector<ExpertFfn> experts;
};

struct GateChoice {
  ExpertId expert = 0;
  double weight = 0.0;
};

/// Numerically stable softmax of the gate logits. Throws ShapeError on a
/// dimension mismatch and NumericError on non-finite logits.
Eigen::VectorXd gate_probabilities(const Eigen::VectorXd& h, const GatingNetwork& gate);

/// Top-k experts by softmax probability, descending; ties go to the lower id.
/// Weights are the raw probabilities, not renormalized over the k picks.
std::vector<GateChoice> gate_select(const Eigen::VectorXd& h, const GatingNetwork& gate, int k);

/// Guess for the next layer: the next layer's gate applied to this layer's output.
ExpertSet speculate_next(const HiddenState& h_out_prev, const GatingNetwork& gate_next, int k);

struct LayerOutput {
  HiddenState h_out;
  std::vector<GateChoice> selection;
  ExpertSet activated;
};

class ToyModel {
 public:
  /// Draws all weights from the config's seed.
  explicit ToyModel(const ToyModelConfig& config);
  /// Uses the given weights verbatim. Throws ConfigError if they disagree with the config.
  ToyModel(const ToyModelConfig& config, std::vector<ToyLayer> layers);

  const ToyModelConfig& config() const noexcept { return config_; }
  const ToyLayer& layer(int index) const { return layers_.at(static_cast<std::size_t>(index)); }
  int ffn_dim() const noexcept { return 2 * config_.hidden_dim; }

  /// h' = h_in + mixing_scale·M·h_in, route h', then h_out = h' + Σ p_e·f_e(h').
  LayerOutput forward_token(const HiddenState& h_in, int layer) const;

  /// Seeded standard-normal token inputs, one per token.
  std::vector<Eigen::VectorXd> token_stream() const;

 private:
  ToyModelConfig config_;
  std::vector<ToyLayer> layers_;
};

struct ModelRun {
  ActivationTrace activations;
  SpeculationTrace speculations;
};

ModelRun run_model(const ToyModel& model);
ModelRun run_model(const ToyModelConfig& config);

}  // namespace moecache
