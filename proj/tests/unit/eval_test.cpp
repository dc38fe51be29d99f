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
#include <sstream>

#include <gtest/gtest.h>

#include "divdec/corpus.hpp"
#include "divdec/eval.hpp"
#include "oracles.hpp"

namespace divdec {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MetricPoint pt(std::string label, double forget, double utility) {
  MetricPoint p;
  p.config_label = std::move(label);
  p.forget_metric = forget;
  p.utility_metric = utility;
  return p;
}

EvalReport hand_report() {
  EvalReport r;
  r.target = pt("target", 0.8, 10.0);
  r.retrain = pt("retrain", 0.2, 11.0);
  // Rescaled retrain = (0.25, 1.1).
  r.points = {pt("linear:alpha=5", 0.4, 10.0),   // (0.5, 1.0): dist^2 = 0.0625 + 0.01
              pt("rank:k=1", 0.16, 12.0),        // (0.2, 1.2): dist^2 = 0.0025 + 0.01
              pt("rank:k=2", 0.0, 11.0)};        // (0.0, 1.1): dist^2 = 0.0625
  return r;
}

/// Small trained world shared by the sweep and scenario tests.
struct World {
  SyntheticCorpus corpus;
  std::vector<FactRecord> forget_facts, retain_facts;
  BackoffLM base, forget_side, retain_side, retrain;

  static World make() {
    CorpusSpec spec;
    spec.n_retain_facts = 6;
    spec.n_forget_facts = 6;
    spec.filler_tokens = 3000;
    spec.vocab_content_size = 120;
    spec.seed = 5;
    SyntheticCorpus c = generate_synthetic(spec);
    std::vector<TokenSeq> all = c.retain_corpus;
    all.insert(all.end(), c.forget_corpus.begin(), c.forget_corpus.end());
    const std::size_t v = c.vocab.size();
    World w{c, {}, {}, BackoffLM(train_counts(all, 5), v), BackoffLM(train_counts(c.forget_corpus, 3), v),
            BackoffLM(train_counts(c.retain_corpus, 3), v), BackoffLM(train_counts(c.retain_corpus, 5), v)};
    for (const auto& f : w.corpus.facts) (f.split == FactSplit::forget ? w.forget_facts : w.retain_facts).push_back(f);
    return w;
  }

  SweepAssets assets() const {
    SweepAssets a;
    a.base = &base;
    a.forget_side = &forget_side;
    a.retain_side = &retain_side;
    a.retrain = &retrain;
    a.forget_facts = forget_facts;
    a.retain_facts = retain_facts;
    a.utility_corpus = std::span<const TokenSeq>(corpus.retain_corpus).first(40);
    return a;
  }
};

const World& world() {
  static const World w = World::make();
  return w;
}

TEST(Perplexity, UniformSource) {
  const testing::ConstantScorer uniform(LogitVector(4, 0.0));
  const std::vector<TokenSeq> corpus{{0, 3, 2, 1}, {0, 1}};
  const PerplexityResult r = perplexity(uniform, corpus);
  EXPECT_DOUBLE_EQ(r.perplexity, 4.0);
  EXPECT_EQ(r.predicted, 4u);
  EXPECT_EQ(r.clipped, 0u);
}

TEST(Perplexity, PerfectSource) {
  const std::vector<TokenSeq> corpus{{0, 3, 4, 4, 3, 1}, {0, 3, 4, 4, 3, 1}};
  const testing::ScriptScorer perfect(5, corpus);
  EXPECT_EQ(perplexity(perfect, corpus).perplexity, 1.0);
}

TEST(Perplexity, MatchesNaiveSummation) {
  std::mt19937_64 rng(2);
  const auto train = testing::random_corpus(rng, 12, 500);
  const BackoffLM lm(train_counts(train, 3), 12);
  const SourceScorer scorer(lm);
  const auto test = testing::random_corpus(rng, 12, 100);
  double nll = 0;
  std::size_t n = 0;
  for (const TokenSeq& s : test) {
    for (std::size_t i = 1; i < s.size(); ++i) {
      nll -= testing::naive_log_prob(lm.logits(std::span<const TokenId>(s).first(i)), s[i]);
      ++n;
    }
  }
  EXPECT_NEAR(perplexity(scorer, test).perplexity, std::exp(nll / static_cast<double>(n)), 1e-10);
}

TEST(Perplexity, MaskedTargetsAreClipped) {
  const testing::ConstantScorer masked(LogitVector{0, 0, 0, -kInf});
  const std::vector<TokenSeq> corpus{{0, 3, 1}};
  const PerplexityResult r = perplexity(masked, corpus, std::log(1e-12));
  EXPECT_EQ(r.clipped, 1u);
  EXPECT_NEAR(std::log(r.perplexity), (-std::log(1e-12) + std::log(3.0)) / 2.0, 1e-12);
}

TEST(Perplexity, Errors) {
  const testing::ConstantScorer uniform(LogitVector(4, 0.0));
  const std::vector<TokenSeq> none;
  EXPECT_THROW(perplexity(uniform, none), UsageError);
  const std::vector<TokenSeq> no_bos{{3, 1}};
  EXPECT_THROW(perplexity(uniform, no_bos), UsageError);
}

TEST(Extraction, MemorizedAndEmpty) {
  FactRecord f;
  f.verbatim_prompt = {0, 3};
  f.cloze_prompt = {0, 4};
  f.answer = {5, 6};
  const std::vector<TokenSeq> script{{0, 3, 5, 6, 1}, {0, 4, 6, 6, 1}};
  const testing::ScriptScorer scorer(7, script);
  const std::vector<FactRecord> facts{f};
  EXPECT_EQ(extraction_rate(scorer, facts, ProbeKind::verbatim), 1.0);
  EXPECT_EQ(extraction_rate(scorer, facts, ProbeKind::cloze), 0.0);
  EXPECT_THROW(extraction_rate(scorer, std::span<const FactRecord>{}, ProbeKind::verbatim), UsageError);
}

TEST(Extraction, RankMaskOverAnswerGivesZero) {
  // Base always prefers token 3, the one-token answer; the forget side
  // favours it most strongly, so rank k=1 masks exactly that token.
  const std::vector<LogitVector> base{{0, -5, -5, 2, 1}};
  const std::vector<LogitVector> forget_side{{0, 0, 0, 4, 0}};
  const std::vector<LogitVector> retain_side{{0, 0, 0, 0, 0}};
  const testing::TableSource b(base), p(forget_side), q(retain_side);
  FactRecord f;
  f.verbatim_prompt = {0};
  f.answer = {3};
  const std::vector<FactRecord> facts{f};
  const DivergenceDecoder plain(b, p, q, DecodeConfig{});
  EXPECT_EQ(extraction_rate(plain, facts, ProbeKind::verbatim), 1.0);
  DecodeConfig rank;
  rank.mode = RankAdjust{1};
  const DivergenceDecoder masked(b, p, q, rank);
  EXPECT_EQ(extraction_rate(masked, facts, ProbeKind::verbatim), 0.0);
}

TEST(SelectBest, HandComputedArgmin) {
  const EvalReport r = hand_report();
  const std::vector<double> d = rescaled_distances(r);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_NEAR(d[0], std::sqrt(0.0725), 1e-12);
  EXPECT_NEAR(d[1], std::sqrt(0.0125), 1e-12);
  EXPECT_NEAR(d[2], std::sqrt(0.0625), 1e-12);
  EXPECT_EQ(select_best(r), "rank:k=1");
}

TEST(SelectBest, SingletonAndCoincident) {
  EvalReport r = hand_report();
  r.points.resize(1);
  EXPECT_EQ(select_best(r), "linear:alpha=5");
  r = hand_report();
  r.points.push_back(pt("z-exact", 0.2, 11.0));
  EXPECT_EQ(rescaled_distances(r).back(), 0.0);
  EXPECT_EQ(select_best(r), "z-exact");
}

TEST(SelectBest, TiesGoToSmallestLabel) {
  EvalReport r = hand_report();
  r.points = {pt("b", 0.4, 10.0), pt("a", 0.4, 10.0), pt("c", 0.4, 10.0)};
  EXPECT_EQ(select_best(r), "a");
}

TEST(SelectBest, ZeroTargetCoordinate) {
  EvalReport r = hand_report();
  r.target.forget_metric = 0.0;
  EXPECT_THROW(select_best(r), DataError);
  r.rescale_forget = false;
  EXPECT_NO_THROW(select_best(r));
}

TEST(SelectBest, InvariantToCommonRescaling) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    EvalReport r;
    r.target = pt("target", testing::random_real(rng, 0.1, 1), testing::random_real(rng, 1, 20));
    r.retrain = pt("retrain", testing::random_real(rng, 0, 1), testing::random_real(rng, 1, 20));
    for (int i = 0; i < 6; ++i) {
      r.points.push_back(pt("c" + std::to_string(i), testing::random_real(rng, 0, 1), testing::random_real(rng, 1, 20)));
    }
    const double c = testing::random_real(rng, 0.1, 10);
    EvalReport scaled = r;
    for (MetricPoint* p : {&scaled.target, &scaled.retrain}) {
      p->forget_metric *= c;
      p->utility_metric *= c;
    }
    for (MetricPoint& p : scaled.points) {
      p.forget_metric *= c;
      p.utility_metric *= c;
    }
    EXPECT_EQ(select_best(scaled), select_best(r));
  }
}

TEST(Sweep, OneConfigGivesThreePoints) {
  const std::vector<DecodeConfig> grid{{.mode = RankAdjust{1}}};
  const EvalReport r = sweep(world().assets(), grid);
  EXPECT_EQ(r.points.size(), 1u);
  EXPECT_EQ(r.target.config_label, "target");
  EXPECT_EQ(r.retrain.config_label, "retrain");
  EXPECT_EQ(r.best, "rank:k=1");
}

TEST(Sweep, AlphaZeroCoincidesWithTarget) {
  const std::vector<DecodeConfig> grid{{.mode = LinearAdjust{0.0}}};
  const EvalReport r = sweep(world().assets(), grid);
  EXPECT_NEAR(r.points[0].forget_metric, r.target.forget_metric, 1e-12);
  EXPECT_NEAR(r.points[0].utility_metric, r.target.utility_metric, 1e-12);
  EXPECT_NEAR(r.points[0].retain_metric, r.target.retain_metric, 1e-12);
}

TEST(Sweep, DeterministicAcrossThreadCounts) {
  const std::vector<DecodeConfig> grid = trigram_grid();
  SweepAssets one = world().assets();
  SweepAssets many = one;
  many.threads = 4;
  const EvalReport a = sweep(one, grid);
  const EvalReport b = sweep(many, grid);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.points.size(), grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(a.points[i].config_label, grid[i].label());
}

TEST(Sweep, Errors) {
  const std::vector<DecodeConfig> empty;
  EXPECT_THROW(sweep(world().assets(), empty), UsageError);
  SweepAssets a = world().assets();
  a.retrain = nullptr;
  const std::vector<DecodeConfig> grid{{}};
  EXPECT_THROW(sweep(a, grid), UsageError);
}

TEST(Report, RoundTrip) {
  EvalReport r = hand_report();
  r.points[1].original_forget_metric = 0.1 + 0.2;
  r.points[2].clip_count = 17;
  r.points[2].probe_kind = ProbeKind::cloze;
  r.target.utility_metric = 1.0 / 3.0;
  r.rescale_utility = false;
  r.best = "rank:k=1";
  std::stringstream text;
  write_report(text, r);
  EXPECT_EQ(read_report(text), r);
}

TEST(Report, SweepReportRoundTrips) {
  const EvalReport r = sweep(world().assets(), trigram_grid());
  std::stringstream a;
  write_report(a, r);
  const EvalReport back = read_report(a);
  EXPECT_EQ(back, r);
  std::stringstream b;
  write_report(b, back);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Report, MalformedInput) {
  std::stringstream missing_header("rescale\tforget=1\tutility=1\n");
  EXPECT_THROW(read_report(missing_header), DataError);
  std::stringstream bad_number(
      "divdec-eval-report 1\nrescale\tforget=1\tutility=1\n"
      "target\tlabel=target\tprobe=verbatim\tforget=x\tutility=1\tclipped=0\tretain=1\n");
  EXPECT_THROW(read_report(bad_number), DataError);
  std::stringstream no_best("divdec-eval-report 1\nrescale\tforget=1\tutility=1\n");
  EXPECT_THROW(read_report(no_best), DataError);
}

TEST(Report, ScatterHasOneRowPerPoint) {
  const EvalReport r = hand_report();
  std::stringstream out;
  write_scatter(out, r);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(out, line)) ++rows;
  EXPECT_EQ(rows, 1 + 2 + r.points.size());
}

TEST(RetrainGap, Reductions) {
  const World& w = world();
  const std::vector<TokenSeq> prefixes = sample_prefixes(w.corpus.retain_corpus, 50, 1);
  DecodeConfig zero;
  zero.mode = LinearAdjust{0.0};
  const DivergenceDecoder alpha0(w.base, w.forget_side, w.retain_side, zero);
  const RetrainGap g0 = retrain_gap(alpha0, w.retrain, prefixes);
  EXPECT_EQ(g0.kl_adjusted, g0.kl_base);

  DecodeConfig strong;
  strong.mode = LinearAdjust{3.0};
  const DivergenceDecoder same(w.base, w.forget_side, w.forget_side, strong);
  const RetrainGap g1 = retrain_gap(same, w.retrain, prefixes);
  EXPECT_EQ(g1.kl_adjusted, g1.kl_base);
  EXPECT_GT(g1.kl_base, 0.0);

  EXPECT_THROW(retrain_gap(alpha0, w.retrain, std::span<const TokenSeq>{}), UsageError);
}

TEST(SamplePrefixes, ShapeAndDeterminism) {
  const std::vector<TokenSeq> docs{{0, 5, 6, 7, 1}, {0, 1}};
  const auto a = sample_prefixes(docs, 100, 3);
  EXPECT_EQ(a, sample_prefixes(docs, 100, 3));
  for (const TokenSeq& p : a) {
    EXPECT_GE(p.size(), 2u);
    EXPECT_LE(p.size(), 4u);
    EXPECT_EQ(p.front(), Vocabulary::kBos);
  }
}

TEST(Scenario, ValidationAndForgetSets) {
  Scenario s;
  EXPECT_THROW(s.validate(), UsageError);
  s.steps = {{"f0000", "f0001"}, {"f0002"}};
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.forget_ids(1), (std::vector<std::string>{"f0000", "f0001", "f0002"}));
  s.steps.push_back({"f0001"});
  EXPECT_THROW(s.validate(), UsageError);
  s.kind = ScenarioKind::scaling;
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.forget_ids(2), (std::vector<std::string>{"f0001"}));
  s.remeasure_original = false;
  EXPECT_THROW(s.validate(), UsageError);
}

ScenarioAssets scenario_assets(const World& w) {
  ScenarioAssets sa;
  sa.base = &w.base;
  sa.retain_side = &w.retain_side;
  sa.retrain = &w.retrain;
  sa.forget_corpus = w.corpus.forget_corpus;
  sa.facts = w.corpus.facts;
  sa.utility_corpus = std::span<const TokenSeq>(w.corpus.retain_corpus).first(40);
  sa.vocab_size = w.corpus.vocab.size();
  return sa;
}

TEST(Scenario, OneStepReducesToSweep) {
  const World& w = world();
  Scenario s;
  for (const auto& f : w.forget_facts) s.steps.push_back({f.fact_id});
  s.steps.resize(1);
  const std::vector<DecodeConfig> grid = trigram_grid();
  const auto reports = run_scenario(s, scenario_assets(w), grid);
  ASSERT_EQ(reports.size(), 1u);

  const std::vector<FactRecord> one{w.forget_facts[0]};
  const auto docs = documents_for_facts(w.corpus.forget_corpus, w.corpus.facts, s.steps[0]);
  const BackoffLM forget_side(train_counts(docs, 3), w.corpus.vocab.size());
  SweepAssets a = w.assets();
  a.forget_side = &forget_side;
  a.forget_facts = one;
  a.original_forget_facts = one;
  EXPECT_EQ(reports[0], sweep(a, grid));
}

TEST(Scenario, ReportPerStepWithOriginalMetric) {
  const World& w = world();
  Scenario s;
  s.kind = ScenarioKind::scaling;
  s.steps = {{w.forget_facts[0].fact_id}, {w.forget_facts[0].fact_id, w.forget_facts[1].fact_id}};
  const std::vector<DecodeConfig> grid{{.mode = RankAdjust{1}}};
  const auto reports = run_scenario(s, scenario_assets(w), grid);
  ASSERT_EQ(reports.size(), 2u);
  for (const EvalReport& r : reports) {
    ASSERT_TRUE(r.points[0].original_forget_metric.has_value());
    ASSERT_TRUE(r.target.original_forget_metric.has_value());
  }
}

TEST(Scenario, UnknownOrRetainFactsRejected) {
  const World& w = world();
  Scenario s;
  s.steps = {{"nope"}};
  const std::vector<DecodeConfig> grid{{}};
  EXPECT_THROW(run_scenario(s, scenario_assets(w), grid), DataError);
  s.steps = {{w.retain_facts[0].fact_id}};
  EXPECT_THROW(run_scenario(s, scenario_assets(w), grid), DataError);
}

TEST(Grids, Defaults) {
  const auto tri = trigram_grid();
  ASSERT_EQ(tri.size(), 11u);
  EXPECT_EQ(tri.front().label(), "linear:alpha=5");
  EXPECT_EQ(tri[5].label(), "linear:alpha=30");
  EXPECT_EQ(tri.back().label(), "rank:k=10");
  const auto lm = lm_grid();
  ASSERT_EQ(lm.size(), 19u);
  EXPECT_EQ(lm[0].label(), "linear:alpha=0.5");
  EXPECT_EQ(lm[6].label(), "linear:alpha=1.1");
  EXPECT_EQ(lm[10].label(), "linear:alpha=1.5");
  EXPECT_EQ(lm.back().label(), "rank:k=1000");
}

}  // namespace
}  // namespace divdec
