// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "moecache/error.hpp"
#include "moecache/trace_io.hpp"
#include "moecache/tracegen.hpp"
#include "oracles.hpp"

namespace moecache {
namespace {

std::string serialize(const ActivationTrace& t) {
  std::ostringstream out;
  write_trace(out, t);
  return out.str();
}

std::string serialize(const SpeculationTrace& t) {
  std::ostringstream out;
  write_trace(out, t);
  return out.str();
}

AnyTrace parse(const std::string& text) {
  std::istringstream in(text);
  return read_trace(in);
}

int count_lines(const std::string& text) {
  return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

TEST(TraceIo, SingleRecordExactText) {
  ActivationTrace t(ModelShape{1, 8, 2}, {{0, 0, {0, 1}}});
  const std::string text = serialize(t);
  EXPECT_EQ(text,
            "{\"kind\":\"activation\",\"num_layers\":1,\"num_experts\":8,\"top_k\":2}\n"
            "{\"t\":0,\"l\":0,\"a\":[0,1]}\n");
  EXPECT_EQ(std::get<ActivationTrace>(parse(text)), t);
}

TEST(TraceIo, SpeculationExactText) {
  SpeculationTrace t(ModelShape{2, 8, 2}, {{0, 1, {1, 4}, {1, 5}}});
  const std::string text = serialize(t);
  EXPECT_EQ(text,
            "{\"kind\":\"speculation\",\"num_layers\":2,\"num_experts\":8,\"top_k\":2}\n"
            "{\"t\":0,\"l\":1,\"g\":[1,4],\"a\":[1,5]}\n");
  EXPECT_EQ(std::get<SpeculationTrace>(parse(text)), t);
}

TEST(TraceIo, EmptyTraceIsHeaderOnly) {
  ActivationTrace t(ModelShape{});
  const std::string text = serialize(t);
  EXPECT_EQ(count_lines(text), 1);
  const auto back = std::get<ActivationTrace>(parse(text));
  EXPECT_EQ(back.num_tokens(), 0);
  EXPECT_EQ(back, t);
}

TEST(TraceIo, LineCountIsOnePlusTokensTimesLayers) {
  ZipfParams p;
  p.shape = {2, 8, 2};
  p.num_tokens = 4;
  const std::string text = serialize(gen_zipf(p));
  EXPECT_EQ(count_lines(text), 1 + 4 * 2);
}

TEST(TraceIo, TrailingNewlineOptional) {
  std::string text = serialize(ActivationTrace(ModelShape{1, 4, 1}, {{0, 0, {2}}, {1, 0, {3}}}));
  text.pop_back();
  EXPECT_EQ(std::get<ActivationTrace>(parse(text)).num_tokens(), 2);
}

TEST(TraceIo, CrlfAccepted) {
  const std::string text =
      "{\"kind\":\"activation\",\"num_layers\":1,\"num_experts\":4,\"top_k\":1}\r\n"
      "{\"t\":0,\"l\":0,\"a\":[2]}\r\n";
  EXPECT_EQ(std::get<ActivationTrace>(parse(text)).activated(0, 0), ExpertSet{2});
}

TEST(TraceIo, RecordOrderNormalized) {
  const std::string text =
      "{\"kind\":\"activation\",\"num_layers\":2,\"num_experts\":4,\"top_k\":1}\n"
      "{\"t\":0,\"l\":1,\"a\":[1]}\n"
      "{\"t\":0,\"l\":0,\"a\":[0]}\n";
  const auto t = std::get<ActivationTrace>(parse(text));
  EXPECT_EQ(t.records()[0].layer, 0);
  EXPECT_EQ(t.activated(0, 1), ExpertSet{1});
}

const std::string kHeader = "{\"kind\":\"activation\",\"num_layers\":32,\"num_experts\":8,\"top_k\":2}\n";

TEST(TraceIo, DuplicateExpertIsValidationError) {
  EXPECT_THROW(parse(kHeader + "{\"t\":0,\"l\":0,\"a\":[3,3]}\n"), ValidationError);
}

TEST(TraceIo, LayerOutOfRangeIsValidationError) {
  EXPECT_THROW(parse(kHeader + "{\"t\":0,\"l\":32,\"a\":[0,1]}\n"), ValidationError);
}

TEST(TraceIo, WrongSetSizeIsValidationError) {
  EXPECT_THROW(parse(kHeader + "{\"t\":0,\"l\":0,\"a\":[0,1,2]}\n"), ValidationError);
}

TEST(TraceIo, ExpertOutOfRangeIsValidationError) {
  EXPECT_THROW(parse(kHeader + "{\"t\":0,\"l\":0,\"a\":[0,8]}\n"), ValidationError);
}

TEST(TraceIo, DuplicateRecordIsValidationError) {
  const std::string one = "{\"t\":0,\"l\":0,\"a\":[0,1]}\n";
  std::string text = "{\"kind\":\"activation\",\"num_layers\":1,\"num_experts\":8,\"top_k\":2}\n";
  EXPECT_THROW(parse(text + one + one), ValidationError);
}

TEST(TraceIo, MalformedJsonNamesTheLine) {
  try {
    parse(kHeader + "{\"t\":0,\"l\":0,\"a\":[0,1]}\n{\"t\":1,\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(TraceIo, StructuralErrors) {
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("{\"kind\":\"other\",\"num_layers\":1,\"num_experts\":8,\"top_k\":2}\n"),
               ParseError);
  // extra key
  EXPECT_THROW(parse(kHeader + "{\"t\":0,\"l\":0,\"a\":[0,1],\"x\":1}\n"), ParseError);
  // keys out of order
  EXPECT_THROW(parse(kHeader + "{\"l\":0,\"t\":0,\"a\":[0,1]}\n"), ParseError);
  // blank line in the middle
  EXPECT_THROW(parse(kHeader + "\n{\"t\":0,\"l\":0,\"a\":[0,1]}\n"), ParseError);
  EXPECT_THROW(parse(kHeader + "{\"t\":\"0\",\"l\":0,\"a\":[0,1]}\n"), ParseError);
  EXPECT_THROW(parse(kHeader + "[1,2]\n"), ParseError);
}

TEST(TraceIo, TypedReadersRejectTheOtherKind) {
  std::istringstream a(serialize(ActivationTrace(ModelShape{1, 4, 1}, {{0, 0, {1}}})));
  EXPECT_THROW(read_speculation_trace(a), ValidationError);
  std::istringstream s(serialize(SpeculationTrace(ModelShape{2, 4, 1}, {{0, 1, {1}, {2}}})));
  EXPECT_THROW(read_activation_trace(s), ValidationError);
}

TEST(TraceIo, WriteFailureIsIoError) {
  std::ostringstream out;
  out.setstate(std::ios::badbit);
  EXPECT_THROW(write_trace(out, ActivationTrace(ModelShape{})), IoError);
}

TEST(TraceIo, MissingFileIsIoError) {
  EXPECT_THROW(load_trace("/nonexistent/dir/trace.jsonl"), IoError);
  EXPECT_THROW(save_trace("/nonexistent/dir/trace.jsonl", ActivationTrace(ModelShape{})), IoError);
}

TEST(TraceIo, FileRoundTrip) {
  oracle::TempDir dir;
  std::mt19937_64 rng(5);
  const auto a = oracle::random_activation_trace({3, 6, 2}, 5, rng);
  const auto s = oracle::random_speculation_trace({3, 6, 2}, 5, rng);
  save_trace(dir / "a.jsonl", a);
  save_trace(dir / "s.jsonl", s);
  EXPECT_EQ(load_activation_trace(dir / "a.jsonl"), a);
  EXPECT_EQ(load_speculation_trace(dir / "s.jsonl"), s);
}

TEST(TraceIoProperty, RandomTracesRoundTripByteExact) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    const ModelShape shape = oracle::random_shape(rng, 6, 12, 4);
    const int tokens = std::uniform_int_distribution<int>(0, 10)(rng);
    const auto a = oracle::random_activation_trace(shape, tokens, rng);
    const std::string first = serialize(a);
    const auto back = std::get<ActivationTrace>(parse(first));
    ASSERT_EQ(back, a);
    ASSERT_EQ(serialize(back), first);

    const auto s = oracle::random_speculation_trace(shape, tokens, rng);
    const std::string sfirst = serialize(s);
    const auto sback = std::get<SpeculationTrace>(parse(sfirst));
    ASSERT_EQ(sback, s);
    ASSERT_EQ(serialize(sback), sfirst);
  }
}

}  // namespace
}  // namespace moecache
