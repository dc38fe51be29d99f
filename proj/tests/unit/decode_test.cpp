// Copyright 2026 The Divdec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "divdec/corpus.hpp"
#include "divdec/decode.hpp"
#include "oracles.hpp"

namespace divdec {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(LinearAdjust, ClosedFormExample) {
  const LogitVector lP{0, 0}, lp{0, std::log(2.0)}, lq{0, 0};
  const LogitVector out = linear_adjust(lP, lp, lq, 1.0);
  EXPECT_EQ(out[0], 0.0);
  EXPECT_EQ(out[1], -std::log(2.0));
  const ProbVector p = softmax(out);
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
}

TEST(LinearAdjust, Reductions) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto lP = testing::random_logits(rng, 20, -10, 10);
    const auto lp = testing::random_logits(rng, 20, -10, 10);
    const auto lq = testing::random_logits(rng, 20, -10, 10);
    EXPECT_EQ(linear_adjust(lP, lp, lq, 0.0), lP);
    EXPECT_EQ(linear_adjust(lP, lp, lp, testing::random_real(rng, 0, 30)), lP);
  }
}

TEST(LinearAdjust, PropagatesUpstreamMask) {
  const LogitVector lP{0, -kInf}, lp{0, 0}, lq{0, 5};
  EXPECT_EQ(linear_adjust(lP, lp, lq, 2.0)[1], -kInf);
}

TEST(LinearAdjust, Errors) {
  const LogitVector two{0, 0}, three{0, 0, 0}, bad{0, kInf};
  EXPECT_THROW(linear_adjust(two, three, two, 1.0), UsageError);
  EXPECT_THROW(linear_adjust(two, bad, two, 1.0), DataError);
  EXPECT_THROW(linear_adjust(two, two, two, -1.0), UsageError);
}

TEST(LinearAdjust, UpDownVoteMonotonicity) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    auto lP = testing::random_logits(rng, 10, -5, 5);
    const auto lp = testing::random_logits(rng, 10, -5, 5);
    const auto lq = testing::random_logits(rng, 10, -5, 5);
    lP[1] = lP[0];
    const double alpha = testing::random_real(rng, 0.01, 10);
    const ProbVector p = softmax(linear_adjust(lP, lp, lq, alpha));
    const double d0 = lq[0] - lp[0], d1 = lq[1] - lp[1];
    if (d0 > d1) EXPECT_GT(p[0], p[1]);
    if (d1 > d0) EXPECT_GT(p[1], p[0]);
  }
}

TEST(AdjustedDistribution, ShiftInvariance) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto lP = testing::random_logits(rng, 30, -8, 8);
    const auto lp = testing::random_logits(rng, 30, -8, 8);
    const auto lq = testing::random_logits(rng, 30, -8, 8);
    const double alpha = testing::random_real(rng, 0, 5);
    const double shift = testing::random_real(rng, -50, 50);
    const ProbVector ref = softmax(linear_adjust(lP, lp, lq, alpha));
    for (int which = 0; which < 3; ++which) {
      auto sP = lP, sp = lp, sq = lq;
      auto& target = which == 0 ? sP : (which == 1 ? sp : sq);
      for (double& x : target) x += shift;
      const ProbVector got = softmax(linear_adjust(sP, sp, sq, alpha));
      for (std::size_t v = 0; v < ref.size(); ++v) EXPECT_NEAR(got[v], ref[v], 1e-12);
    }
  }
}

TEST(RankAdjust, HandExample) {
  const LogitVector lP{1, 2, 3}, lp{3, 1, 2}, lq{0, 0, 0};
  const LogitVector out = rank_adjust(lP, lp, lq, 2);
  EXPECT_EQ(out[0], -kInf);
  EXPECT_EQ(out[1], 2.0);
  EXPECT_EQ(out[2], -kInf);
}

TEST(RankAdjust, KZeroAndTies) {
  const LogitVector lP{1, 2, 3}, flat{0.5, 0.5, 0.5};
  EXPECT_EQ(rank_adjust(lP, flat, flat, 0), lP);
  const LogitVector one = rank_adjust(lP, flat, flat, 1);
  EXPECT_EQ(one[0], -kInf);
  EXPECT_EQ(one[1], 2.0);
  EXPECT_EQ(most_divergent(flat, flat, 2), (std::vector<TokenId>{0, 1}));
}

TEST(RankAdjust, SignConventionMasksForgetFavoured) {
  // Token 2 is much likelier under the forget side, so it goes first.
  const LogitVector lP{0, 0, 0, 0}, lp{0, 0, 5, 1}, lq{0, 0, 0, 0};
  EXPECT_EQ(most_divergent(lp, lq, 2), (std::vector<TokenId>{2, 3}));
}

TEST(RankAdjust, MatchesSortOracle) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 2 + testing::random_index(rng, 40);
    const auto lP = testing::random_logits(rng, n, -5, 5);
    auto lp = testing::random_logits(rng, n, -5, 5);
    auto lq = testing::random_logits(rng, n, -5, 5);
    // Force some exact ties.
    for (std::size_t v = 0; v + 1 < n; v += 3) {
      lp[v + 1] = lp[v];
      lq[v + 1] = lq[v];
    }
    const std::size_t k = testing::random_index(rng, n);
    const LogitVector out = rank_adjust(lP, lp, lq, k);
    const auto masked = testing::rank_oracle(lp, lq, k);
    for (std::size_t v = 0; v < n; ++v) {
      if (masked.count(static_cast<TokenId>(v)) != 0) {
        EXPECT_EQ(out[v], -kInf);
      } else {
        EXPECT_EQ(out[v], lP[v]);
      }
    }
  }
}

TEST(RankAdjust, Errors) {
  const LogitVector three{0, 0, 0};
  EXPECT_THROW(rank_adjust(three, three, three, 3), UsageError);
  const LogitVector two{0, 0};
  EXPECT_THROW(rank_adjust(three, two, three, 1), UsageError);
}

TEST(Softmax, MaskedEntriesAreExactlyZero) {
  const ProbVector p = softmax(LogitVector{0, -kInf, 1});
  EXPECT_EQ(p[1], 0.0);
  EXPECT_NEAR(p[0] + p[2], 1.0, 1e-15);
}

TEST(Softmax, SumsToOne) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const ProbVector p = softmax(testing::random_logits(rng, 50, -30, 30));
    double s = 0;
    for (double x : p) s += x;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Argmax, LowerIdWinsTies) {
  EXPECT_EQ(argmax(LogitVector{1.0, 2.0, 0.5}), 1u);
  EXPECT_EQ(argmax(LogitVector{3.0, 1.0, 3.0}), 0u);
  EXPECT_EQ(argmax(LogitVector{-kInf, -kInf, 0.0}), 2u);
}

TEST(SampleNext, MaskedTokenNeverDrawn) {
  Rng rng(1);
  DecodeConfig cfg;
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_next(LogitVector{0, -kInf}, cfg, rng), 0u);
  cfg.temperature = 0;
  EXPECT_EQ(sample_next(LogitVector{0, -kInf}, cfg, rng), 0u);
}

TEST(SampleNext, GreedyIsArgmax) {
  Rng rng(1);
  DecodeConfig cfg;
  cfg.temperature = 0;
  EXPECT_EQ(sample_next(LogitVector{1.0, 2.0, 0.5}, cfg, rng), 1u);
}

TEST(SampleNext, FairCoin) {
  Rng rng(12345);
  DecodeConfig cfg;
  std::size_t zeros = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) zeros += sample_next(LogitVector{0, 0}, cfg, rng) == 0 ? 1 : 0;
  const double freq = static_cast<double>(zeros) / draws;
  EXPECT_GE(freq, 0.494);
  EXPECT_LE(freq, 0.506);
}

TEST(SampleNext, AllMaskedIsAnError) {
  Rng rng(1);
  EXPECT_THROW(sample_next(LogitVector{-kInf, -kInf}, DecodeConfig{}, rng), DataError);
}

TEST(SamplingDistribution, TopKAndTopP) {
  const LogitVector l{std::log(0.5), std::log(0.3), std::log(0.15), std::log(0.05)};
  DecodeConfig cfg;
  cfg.truncation = TopK{2};
  ProbVector p = sampling_distribution(l, cfg);
  EXPECT_NEAR(p[0], 0.625, 1e-12);
  EXPECT_NEAR(p[1], 0.375, 1e-12);
  EXPECT_EQ(p[2], 0.0);
  cfg.truncation = TopP{0.9};
  p = sampling_distribution(l, cfg);
  EXPECT_GT(p[2], 0.0);
  EXPECT_EQ(p[3], 0.0);
  cfg.truncation = TopP{0.5};
  p = sampling_distribution(l, cfg);
  EXPECT_EQ(p[0], 1.0);
}

TEST(SamplingDistribution, TemperatureSharpens) {
  const LogitVector l{0.0, 1.0};
  DecodeConfig cold;
  cold.temperature = 0.5;
  const ProbVector p = sampling_distribution(l, cold);
  EXPECT_NEAR(p[1], 1.0 / (1.0 + std::exp(-2.0)), 1e-12);
}

TEST(DecodeConfig, ValidationAndLabels) {
  DecodeConfig cfg;
  cfg.mode = RankAdjust{5};
  EXPECT_THROW(cfg.validate(5), UsageError);
  EXPECT_NO_THROW(cfg.validate(6));
  EXPECT_EQ(cfg.label(), "rank:k=5");
  cfg.mode = LinearAdjust{10};
  EXPECT_EQ(cfg.label(), "linear:alpha=10");
  cfg.mode = LinearAdjust{0.7};
  EXPECT_EQ(cfg.label(), "linear:alpha=0.7");
  cfg.truncation = TopK{0};
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg.truncation = TopP{1.5};
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg.truncation = NoTruncation{};
  cfg.temperature = -1;
  EXPECT_THROW(cfg.validate(), UsageError);
}

class DecoderTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 5; ++i) {
      base_rows.push_back(testing::random_logits(rng, 12, -4, 4));
      forget_rows.push_back(testing::random_logits(rng, 12, -4, 4));
      retain_rows.push_back(testing::random_logits(rng, 12, -4, 4));
    }
  }
  std::vector<LogitVector> base_rows, forget_rows, retain_rows;
};

TEST_F(DecoderTest, AlphaZeroAndEqualAuxiliariesMatchBase) {
  const testing::TableSource base(base_rows), forget_side(forget_rows), retain_side(retain_rows);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    DecodeConfig plain;
    plain.seed = seed;
    plain.max_new_tokens = 15;
    const DivergenceDecoder reference(base, forget_side, retain_side, plain);
    DecodeConfig zero = plain;
    zero.mode = LinearAdjust{0.0};
    const DivergenceDecoder alpha0(base, forget_side, retain_side, zero);
    DecodeConfig strong = plain;
    strong.mode = LinearAdjust{7.0};
    const DivergenceDecoder same_aux(base, forget_side, forget_side, strong);
    const TokenSeq prompt{Vocabulary::kBos};
    EXPECT_EQ(alpha0.generate(prompt).tokens, reference.generate(prompt).tokens);
    EXPECT_EQ(same_aux.generate(prompt).tokens, reference.generate(prompt).tokens);
  }
}

TEST_F(DecoderTest, QueryCounterAndTrace) {
  // Keep EOS out of reach so generation runs the full budget.
  for (auto& row : base_rows) row[Vocabulary::kEos] = -100;
  const testing::TableSource base(base_rows), forget_side(forget_rows), retain_side(retain_rows);
  DecodeConfig cfg;
  cfg.max_new_tokens = 10;
  cfg.mode = RankAdjust{2};
  const DivergenceDecoder dec(base, forget_side, retain_side, cfg);
  std::vector<StepTrace> trace;
  const GenerateResult r = dec.generate(TokenSeq{Vocabulary::kBos}, &trace);
  ASSERT_EQ(r.tokens.size(), 10u);
  EXPECT_EQ(r.source_queries, 30u);
  ASSERT_EQ(trace.size(), 10u);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    EXPECT_EQ(trace[i].step, i);
    EXPECT_EQ(trace[i].chosen, r.tokens[i]);
    ASSERT_EQ(trace[i].top.size(), 5u);
    for (std::size_t j = 1; j < 5; ++j) EXPECT_GE(trace[i].top[j - 1].second, trace[i].top[j].second);
  }
}

TEST_F(DecoderTest, StopsAtEos) {
  for (auto& row : base_rows) row[Vocabulary::kEos] = 100;
  const testing::TableSource base(base_rows), forget_side(forget_rows), retain_side(retain_rows);
  DecodeConfig cfg;
  cfg.temperature = 0;
  const DivergenceDecoder dec(base, forget_side, retain_side, cfg);
  EXPECT_EQ(dec.generate(TokenSeq{Vocabulary::kBos}).tokens, (TokenSeq{Vocabulary::kEos}));
}

TEST_F(DecoderTest, DeterministicPerSeed) {
  const testing::TableSource base(base_rows), forget_side(forget_rows), retain_side(retain_rows);
  DecodeConfig cfg;
  cfg.mode = LinearAdjust{1.5};
  cfg.seed = 99;
  const DivergenceDecoder dec(base, forget_side, retain_side, cfg);
  const TokenSeq prompt{Vocabulary::kBos, 4};
  EXPECT_EQ(dec.generate(prompt).tokens, dec.generate(prompt).tokens);
}

TEST_F(DecoderTest, RankMaskCardinality) {
  const testing::TableSource base(base_rows), forget_side(forget_rows), retain_side(retain_rows);
  DecodeConfig cfg;
  cfg.mode = RankAdjust{3};
  const DivergenceDecoder dec(base, forget_side, retain_side, cfg);
  const ProbVector p = dec.adjusted_distribution(TokenSeq{Vocabulary::kBos});
  EXPECT_EQ(std::count(p.begin(), p.end(), 0.0), 3);
}

TEST_F(DecoderTest, Errors) {
  const testing::TableSource base(base_rows), forget_side(forget_rows), retain_side(retain_rows);
  const std::vector<LogitVector> short_rows{LogitVector(5, 0.0)};
  const testing::TableSource small(short_rows);
  EXPECT_THROW(DivergenceDecoder(base, small, retain_side, DecodeConfig{}), UsageError);
  DecodeConfig big;
  big.mode = RankAdjust{12};
  EXPECT_THROW(DivergenceDecoder(base, forget_side, retain_side, big), UsageError);
  const DivergenceDecoder dec(base, forget_side, retain_side, DecodeConfig{});
  EXPECT_THROW(dec.generate(TokenSeq{4}), UsageError);
  EXPECT_THROW(dec.generate(TokenSeq{}), UsageError);
}

TEST_F(DecoderTest, GreedyContinuationFollowsArgmax) {
  const testing::TableSource base(base_rows);
  const SourceScorer scorer(base);
  const TokenSeq got = greedy_continuation(scorer, TokenSeq{Vocabulary::kBos}, 3);
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0], argmax(base_rows[1]));
  EXPECT_EQ(got[1], argmax(base_rows[2]));
  EXPECT_EQ(got[2], argmax(base_rows[3]));
}

}  // namespace
}  // namespace divdec
