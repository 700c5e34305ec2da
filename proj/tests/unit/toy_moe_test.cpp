// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "moecache/error.hpp"
#include "moecache/metrics.hpp"
#include "moecache/toy_moe.hpp"
#include "moecache/trace_io.hpp"
#include "oracles.hpp"

namespace moecache {
namespace {

// Identity gate: logits equal the hidden state.
GatingNetwork identity_gate(int e) {
  return {Eigen::MatrixXd::Identity(e, e), Eigen::VectorXd::Zero(e)};
}

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

std::vector<ExpertId> experts_of(const std::vector<GateChoice>& cs) {
  std::vector<ExpertId> out;
  for (const auto& c : cs) out.push_back(c.expert);
  return out;
}

double accuracy(const SpeculationTrace& t) {
  return *speculation_metrics(t).total.recall().value();
}

// Overlap of each guess with the true set of a token half the stream away:
// same marginals as the guesses, no per-token information.
double shuffled_baseline(const ModelRun& run) {
  const auto& spec = run.speculations;
  const int tokens = spec.num_tokens();
  long hits = 0;
  long total = 0;
  for (const auto& r : spec.records()) {
    const int other = (r.token + tokens / 2) % tokens;
    hits += static_cast<long>(intersection_size(r.guessed, spec.at(other, r.layer).actual));
    total += static_cast<long>(r.guessed.size());
  }
  return double(hits) / double(total);
}

TEST(GateSelect, ArgmaxOrdering) {
  const auto sel = gate_select(vec({2, 1, 0, 0, 0, 0, 0, 0}), identity_gate(8), 2);
  EXPECT_EQ(experts_of(sel), (std::vector<ExpertId>{0, 1}));
  EXPECT_GT(sel[0].weight, sel[1].weight);
}

TEST(GateSelect, DescendingOrder) {
  const auto sel = gate_select(vec({0, 1, 3, 2}), identity_gate(4), 3);
  EXPECT_EQ(experts_of(sel), (std::vector<ExpertId>{2, 3, 1}));
}

TEST(GateSelect, EqualLogitsTieBreakByIndex) {
  const auto sel = gate_select(Eigen::VectorXd::Constant(8, 0.7), identity_gate(8), 2);
  EXPECT_EQ(experts_of(sel), (std::vector<ExpertId>{0, 1}));
}

TEST(GateSelect, AnalyticSoftmax) {
  const auto p = gate_probabilities(vec({std::log(2.0), std::log(1.0)}), identity_gate(2));
  EXPECT_NEAR(p(0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p(1), 1.0 / 3.0, 1e-15);
}

TEST(GateSelect, WeightsAreNotRenormalized) {
  const auto sel = gate_select(vec({1, 1, 1, 1}), identity_gate(4), 2);
  EXPECT_DOUBLE_EQ(sel[0].weight, 0.25);
  EXPECT_DOUBLE_EQ(sel[1].weight, 0.25);
}

TEST(GateSelect, Errors) {
  EXPECT_THROW(gate_select(vec({1, 2, 3}), identity_gate(4), 2), ShapeError);
  EXPECT_THROW(gate_select(vec({1, 2, 3, 4}), identity_gate(4), 5), ShapeError);
  EXPECT_THROW(gate_select(vec({1, std::numeric_limits<double>::infinity(), 0, 0}),
                           identity_gate(4), 2),
               NumericError);
  EXPECT_THROW(gate_select(vec({1, std::nan(""), 0, 0}), identity_gate(4), 2), NumericError);
}

TEST(GateSelect, LargeLogitsStayFinite) {
  const auto p = gate_probabilities(vec({1000, 999, -1000}), identity_gate(3));
  EXPECT_TRUE(p.allFinite());
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
}

TEST(GateProperty, SoftmaxSanity) {
  ToyModelConfig c;
  c.shape = {8, 8, 2};
  const ToyModel m(c);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    Eigen::VectorXd h(c.hidden_dim);
    for (Eigen::Index j = 0; j < h.size(); ++j) h(j) = n(rng);
    const auto p = gate_probabilities(h, m.layer(i % 8).gate);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    for (Eigen::Index e = 0; e < p.size(); ++e) {
      EXPECT_GT(p(e), 0.0);
      EXPECT_LT(p(e), 1.0);
    }
  }
}

TEST(ToyModel, ConfigValidation) {
  ToyModelConfig c;
  c.hidden_dim = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.mixing_scale = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.num_tokens = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.shape.top_k = 9;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ToyModel, IdentityResidualWhenNothingPerturbs) {
  ToyModelConfig c;
  c.shape = {3, 4, 2};
  c.hidden_dim = 5;
  c.mixing_scale = 0.0;
  const ToyModel seeded(c);
  std::vector<ToyLayer> layers;
  for (int l = 0; l < 3; ++l) {
    ToyLayer w = seeded.layer(l);
    for (auto& f : w.experts) {
      f.up.setZero();
      f.down.setZero();
    }
    layers.push_back(std::move(w));
  }
  const ToyModel model(c, layers);
  const Eigen::VectorXd h = vec({0.3, -1.2, 2.0, 0.0, 5.5});
  for (int l = 0; l < 3; ++l) {
    EXPECT_EQ(model.forward_token({h, l - 1}, l).h_out.values, h);
  }
}

TEST(ToyModel, ExplicitWeightsMustMatchShape) {
  ToyModelConfig c;
  c.shape = {2, 4, 2};
  c.hidden_dim = 4;
  const ToyModel seeded(c);
  std::vector<ToyLayer> one{seeded.layer(0)};
  EXPECT_THROW(ToyModel(c, one), ConfigError);
  std::vector<ToyLayer> bad{seeded.layer(0), seeded.layer(1)};
  bad[1].gate.weights.resize(3, 4);
  EXPECT_THROW(ToyModel(c, bad), ConfigError);
}

TEST(ToyModel, ForwardMatchesStraightLineReimplementation) {
  for (std::uint64_t seed : {1u, 2u, 3u, 42u}) {
    ToyModelConfig c;
    c.shape = {2, 4, 2};
    c.hidden_dim = 4;
    c.num_tokens = 16;
    c.seed = seed;
    c.mixing_scale = 0.3;
    const ToyModel model(c);
    for (const auto& token : model.token_stream()) {
      HiddenState h{token, -1};
      std::vector<double> ref(token.data(), token.data() + token.size());
      for (int l = 0; l < 2; ++l) {
        const auto out = model.forward_token(h, l);
        const auto expect = oracle::forward(model.layer(l), c.mixing_scale, 2, ref);
        ASSERT_EQ(std::vector<int>(out.activated.begin(), out.activated.end()), expect.activated);
        for (int i = 0; i < 4; ++i) ASSERT_NEAR(out.h_out.values(i), expect.h_out[static_cast<std::size_t>(i)], 1e-12);
        h = out.h_out;
        ref = expect.h_out;
      }
    }
  }
}

TEST(ToyModel, SpeculationUsesNextGateOnPreviousOutput) {
  ToyModelConfig c;
  c.shape = {4, 8, 2};
  c.num_tokens = 6;
  const ToyModel model(c);
  const ModelRun run = run_model(model);
  const auto tokens = model.token_stream();
  for (int t = 0; t < 6; ++t) {
    HiddenState h{tokens[static_cast<std::size_t>(t)], -1};
    for (int l = 0; l < 4; ++l) {
      if (l > 0) {
        const auto ref = oracle::softmax_logits(
            std::vector<double>(h.values.data(), h.values.data() + h.values.size()),
            model.layer(l).gate);
        std::vector<int> order(ref.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return ref[std::size_t(a)] > ref[std::size_t(b)]; });
        EXPECT_EQ(run.speculations.at(t, l).guessed, (ExpertSet{order[0], order[1]}));
      }
      h = model.forward_token(h, l).h_out;
    }
  }
}

TEST(ToyModel, Deterministic) {
  ToyModelConfig c;
  c.shape = {6, 8, 2};
  c.num_tokens = 20;
  const ModelRun a = run_model(c);
  const ModelRun b = run_model(c);
  EXPECT_EQ(a.activations, b.activations);
  EXPECT_EQ(a.speculations, b.speculations);
  c.seed = 43;
  EXPECT_NE(run_model(c).activations, a.activations);
}

TEST(RunModel, SingleLayerHasNoSpeculation) {
  ToyModelConfig c;
  c.shape = {1, 8, 2};
  c.num_tokens = 10;
  const ModelRun r = run_model(c);
  EXPECT_EQ(r.activations.num_tokens(), 10);
  EXPECT_TRUE(r.speculations.empty());
}

TEST(RunModel, ZeroTokens) {
  ToyModelConfig c;
  c.num_tokens = 0;
  const ModelRun r = run_model(c);
  EXPECT_TRUE(r.activations.empty());
  EXPECT_TRUE(r.speculations.empty());
}

TEST(RunModel, DefaultConfigRoundTrips) {
  const ModelRun r = run_model(ToyModelConfig{});
  EXPECT_EQ(r.activations.num_tokens(), 64);
  EXPECT_EQ(r.speculations.num_tokens(), 64);
  std::stringstream a;
  write_trace(a, r.activations);
  EXPECT_EQ(read_activation_trace(a), r.activations);
  std::stringstream s;
  write_trace(s, r.speculations);
  EXPECT_EQ(read_speculation_trace(s), r.speculations);
  for (const auto& rec : r.speculations.records()) {
    EXPECT_EQ(rec.actual, r.activations.activated(rec.token, rec.layer));
  }
}

TEST(Speculation, ZeroMixingIsExact) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ToyModelConfig c;
    c.mixing_scale = 0.0;
    c.seed = seed;
    c.num_tokens = 32;
    const auto spec = run_model(c).speculations;
    for (const auto& r : spec.records()) ASSERT_EQ(r.guessed, r.actual);
  }
}

TEST(Speculation, DefaultConfigLiesBetweenTheExtremes) {
  const ModelRun run = run_model(ToyModelConfig{});
  const double acc = accuracy(run.speculations);
  EXPECT_LT(acc, 1.0);
  EXPECT_GT(acc, shuffled_baseline(run) + 0.1);
  EXPECT_EQ(acc, accuracy(run_model(ToyModelConfig{}).speculations));
}

TEST(Speculation, HugeMixingFallsToChanceOverlap) {
  double acc = 0.0;
  double chance = 0.0;
  double acc_zero = 1.0;
  double chance_zero = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ToyModelConfig c;
    c.seed = seed;
    c.mixing_scale = 100.0;
    const ModelRun run = run_model(c);
    acc += accuracy(run.speculations) / 10.0;
    chance += shuffled_baseline(run) / 10.0;
    c.mixing_scale = 0.0;
    const ModelRun still = run_model(c);
    acc_zero = std::min(acc_zero, accuracy(still.speculations));
    chance_zero += shuffled_baseline(still) / 10.0;
  }
  EXPECT_NEAR(acc, chance, 0.03);
  // the baseline itself separates a working predictor from a blind one
  EXPECT_EQ(acc_zero, 1.0);
  EXPECT_LT(chance_zero, 0.9);
}

TEST(Speculation, AccuracyDegradesWithMixing) {
  double previous = 2.0;
  for (double alpha : {0.0, 0.05, 0.1, 0.5, 1.0}) {
    double mean = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      ToyModelConfig c;
      c.seed = seed;
      c.mixing_scale = alpha;
      mean += accuracy(run_model(c).speculations) / 10.0;
    }
    EXPECT_LE(mean, previous) << "alpha " << alpha;
    previous = mean;
  }
}

}  // namespace
}  // namespace moecache
