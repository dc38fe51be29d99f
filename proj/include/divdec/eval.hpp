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

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "divdec/common.hpp"
#include "divdec/corpus.hpp"
#include "divdec/decode.hpp"
#include "divdec/ngram_lm.hpp"

namespace divdec {

enum class ProbeKind { verbatim, cloze };
std::string_view to_string(ProbeKind kind);
ProbeKind parse_probe_kind(std::string_view text);

// ln(1e-12): log-probability charged for a target token the scorer masked.
inline const double kLogFloor = std::log(1e-12);

struct PerplexityResult {
  double perplexity = 0.0;
  std::size_t predicted = 0;  // scored targets (EOS yes, BOS no)
  std::size_t clipped = 0;    // targets that hit the log floor
};

// Every sequence must start with BOS; each later token is predicted from the
// tokens before it. Throws UsageError on an empty corpus.
PerplexityResult perplexity(const TokenScorer& scorer, std::span<const TokenSeq> corpus,
                            double log_floor = kLogFloor);

// Fraction of facts whose greedy continuation of the probe prompt equals the
// answer exactly. Throws UsageError on an empty fact list.
double extraction_rate(const TokenScorer& scorer, std::span<const FactRecord> facts, ProbeKind probe);

bool extracts(const TokenScorer& scorer, const FactRecord& fact, ProbeKind probe);

struct MetricPoint {
  std::string config_label;
  ProbeKind probe_kind = ProbeKind::verbatim;
  double forget_metric = 0.0;   // extraction rate on the forget facts
  double utility_metric = 0.0;  // perplexity on the utility corpus
  std::size_t clip_count = 0;
  double retain_metric = 0.0;   // extraction rate on the retain facts
  std::optional<double> original_forget_metric;

  bool operator==(const MetricPoint&) const = default;
};

struct EvalReport {
  std::vector<MetricPoint> points;
  MetricPoint target;
  MetricPoint retrain;
  bool rescale_forget = true;
  bool rescale_utility = true;
  std::string best;

  const MetricPoint& point(std::string_view label) const;
  bool operator==(const EvalReport&) const = default;
};

inline constexpr std::string_view kTargetLabel = "target";
inline constexpr std::string_view kRetrainLabel = "retrain";

/// Models and data a sweep evaluates against. Pointers and spans are
/// borrowed.
struct SweepAssets {
  const LogitSource* base = nullptr;
  const LogitSource* forget_side = nullptr;
  const LogitSource* retain_side = nullptr;
  const LogitSource* retrain = nullptr;
  std::span<const FactRecord> forget_facts;
  std::span<const FactRecord> retain_facts;
  std::span<const FactRecord> original_forget_facts;  // empty: not reported
  std::span<const TokenSeq> utility_corpus;
  ProbeKind probe = ProbeKind::verbatim;
  std::size_t threads = 1;
};

MetricPoint evaluate_point(const TokenScorer& scorer, std::string label, const SweepAssets& assets);

// One point per grid entry in grid order, plus target and retrain points, and
// `best` filled by select_best.
EvalReport sweep(const SweepAssets& assets, std::span<const DecodeConfig> grid);

// Distance of every point to the retrain point after dividing each enabled
// axis by the target's value. Throws DataError on a zero target coordinate.
std::vector<double> rescaled_distances(const EvalReport& report);

// Closest point to retrain; exact ties go to the lexicographically smallest
// label.
std::string select_best(const EvalReport& report);

struct RetrainGap {
  double kl_adjusted = 0.0;
  double kl_base = 0.0;
  std::size_t clipped = 0;
};

// Mean KL(retrain || adjusted) and KL(retrain || base) over the prefixes.
// Masked tokens that the retrain model supports use kLogFloor.
RetrainGap retrain_gap(const DivergenceDecoder& dec, const LogitSource& retrain,
                       std::span<const TokenSeq> prefixes);

// `n` BOS-led prefixes cut at uniform positions of uniformly drawn documents
// (each prefix keeps at least one token after BOS).
std::vector<TokenSeq> sample_prefixes(std::span<const TokenSeq> docs, std::size_t n, std::uint64_t seed);

enum class ScenarioKind { sustainability, scaling };
std::string_view to_string(ScenarioKind kind);
ScenarioKind parse_scenario_kind(std::string_view text);

/// Sustainability steps are disjoint forget sets whose union is forgotten at
/// each step; scaling steps are complete forget sets on their own. The
/// original set is steps.front() either way.
struct Scenario {
  ScenarioKind kind = ScenarioKind::sustainability;
  std::vector<std::vector<std::string>> steps;
  bool remeasure_original = true;

  void validate() const;
  std::vector<std::string> forget_ids(std::size_t step) const;
  bool operator==(const Scenario&) const = default;
};

struct ScenarioAssets {
  const LogitSource* base = nullptr;
  const LogitSource* retain_side = nullptr;
  const LogitSource* retrain = nullptr;
  std::span<const TokenSeq> forget_corpus;
  std::span<const FactRecord> facts;
  std::span<const TokenSeq> utility_corpus;
  std::size_t vocab_size = 0;
  std::size_t aux_order = 3;
  ProbeKind probe = ProbeKind::verbatim;
  std::size_t threads = 1;
};

// One selected report per step. The forget side is retrained from the forget
// corpus at every step, keeping documents of the step's forget facts.
std::vector<EvalReport> run_scenario(const Scenario& scenario, const ScenarioAssets& assets,
                                     std::span<const DecodeConfig> grid);

// alpha in {5, 10, ..., 30} and k in {1, 2, 3, 5, 10}.
std::vector<DecodeConfig> trigram_grid();
// alpha in {0.5, 0.6, ..., 1.5} and k in {1, 5, 20, 50, 100, 200, 500, 1000}.
std::vector<DecodeConfig> lm_grid();

// Report text format:
//   divdec-eval-report 1
//   rescale  forget=<0|1>  utility=<0|1>
//   target   label=...  probe=...  forget=...  utility=...  clipped=...  retain=...  [original=...]
//   retrain  (same fields)
//   point    (same fields), one line per config
//   best     <label>
// Fields are tab-separated; reals use 17 significant digits.
void write_report(std::ostream& out, const EvalReport& report);
EvalReport read_report(std::istream& in);
void save_report(const std::filesystem::path& path, const EvalReport& report);
EvalReport load_report(const std::filesystem::path& path);

// Plot-ready TSV: role, label, forget, utility and their rescaled values.
void write_scatter(std::ostream& out, const EvalReport& report);

}  // namespace divdec
