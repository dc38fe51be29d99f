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

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "divdec/common.hpp"
#include "divdec/ngram_lm.hpp"

namespace divdec {

// Base logits untouched (still queries all three sources during generation).
struct NoAdjust {
  bool operator==(const NoAdjust&) const = default;
};

// out = base + alpha * (retain_side - forget_side)
struct LinearAdjust {
  double alpha = 1.0;
  bool operator==(const LinearAdjust&) const = default;
};

// Masks the k tokens with the largest forget_side - retain_side.
struct RankAdjust {
  std::size_t k = 1;
  bool operator==(const RankAdjust&) const = default;
};

using Adjustment = std::variant<NoAdjust, LinearAdjust, RankAdjust>;

struct NoTruncation {
  bool operator==(const NoTruncation&) const = default;
};
struct TopK {
  std::size_t m = 40;
  bool operator==(const TopK&) const = default;
};
struct TopP {
  double p = 0.95;
  bool operator==(const TopP&) const = default;
};
using Truncation = std::variant<NoTruncation, TopK, TopP>;

struct DecodeConfig {
  Adjustment mode = NoAdjust{};
  // 0 selects greedy decoding (argmax, ties to the lower id).
  double temperature = 1.0;
  Truncation truncation = NoTruncation{};
  std::size_t max_new_tokens = 32;
  std::uint64_t seed = 0;

  bool greedy() const { return temperature == 0.0; }

  // Throws UsageError; vocab_size 0 skips the vocabulary-dependent checks.
  void validate(std::size_t vocab_size = 0) const;

  // Stable identifier used in reports, e.g. "linear:alpha=10" or "rank:k=1".
  std::string label() const;

  bool operator==(const DecodeConfig&) const = default;
};

std::string adjustment_label(const Adjustment& mode);

// mt19937_64 with a unit-interval draw that does not depend on the standard
// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

LogitVector linear_adjust(std::span<const double> base, std::span<const double> forget_side,
                          std::span<const double> retain_side, double alpha);

// Rank 1 is the largest forget_side - retain_side; ties go to the lower id.
LogitVector rank_adjust(std::span<const double> base, std::span<const double> forget_side,
                        std::span<const double> retain_side, std::size_t k);

// Ids of the k largest forget_side - retain_side entries in rank order.
std::vector<TokenId> most_divergent(std::span<const double> forget_side,
                                    std::span<const double> retain_side, std::size_t k);

LogitVector apply_adjustment(const Adjustment& mode, std::span<const double> base,
                             std::span<const double> forget_side, std::span<const double> retain_side);

// Numerically stable softmax; -inf entries get exactly zero.
ProbVector softmax(std::span<const double> logits);
// log-sum-exp over finite entries; -inf when all are masked.
double log_sum_exp(std::span<const double> logits);
// Lowest id among the maximal finite entries.
TokenId argmax(std::span<const double> logits);

// temperature -> truncation -> softmax -> draw. Throws DataError when every
// entry is masked.
TokenId sample_next(std::span<const double> logits, const DecodeConfig& cfg, Rng& rng);

// Probabilities actually used by sample_next (after temperature and
// truncation). Greedy configs return a one-hot vector.
ProbVector sampling_distribution(std::span<const double> logits, const DecodeConfig& cfg);

/// Anything that produces next-token logits, possibly with -inf masks.
class TokenScorer {
 public:
  virtual ~TokenScorer() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual LogitVector next_logits(std::span<const TokenId> prefix) const = 0;
};

/// Scores straight from one LogitSource.
class SourceScorer final : public TokenScorer {
 public:
  explicit SourceScorer(const LogitSource& source) : source_(source) {}
  std::size_t vocab_size() const override { return source_.vocab_size(); }
  LogitVector next_logits(std::span<const TokenId> prefix) const override {
    return source_.logits(prefix);
  }

 private:
  const LogitSource& source_;
};

struct GenerateResult {
  TokenSeq tokens;  // newly emitted tokens, EOS included when it ended the run
  std::size_t source_queries = 0;
};

struct StepTrace {
  std::size_t step = 0;
  TokenId chosen = 0;
  std::vector<std::pair<TokenId, double>> top;  // adjusted probabilities, descending
};

/// Approximates sampling from a retain-only model by steering `base` with the
/// divergence between `retain_side` and `forget_side`.
///
/// Holds references; the three sources must outlive the decoder and share one
/// vocabulary size.
class DivergenceDecoder final : public TokenScorer {
 public:
  DivergenceDecoder(const LogitSource& base, const LogitSource& forget_side,
                    const LogitSource& retain_side, DecodeConfig config);

  const LogitSource& base() const { return base_; }
  const LogitSource& forget_side() const { return forget_; }
  const LogitSource& retain_side() const { return retain_; }
  const DecodeConfig& config() const { return config_; }

  std::size_t vocab_size() const override { return base_.vocab_size(); }

  // Queries the three sources once each and adds 3 to *queries when given.
  LogitVector adjusted_logits(std::span<const TokenId> prefix, std::size_t* queries = nullptr) const;
  LogitVector next_logits(std::span<const TokenId> prefix) const override {
    return adjusted_logits(prefix);
  }

  // softmax of the adjusted logits at temperature 1, no truncation.
  ProbVector adjusted_distribution(std::span<const TokenId> prefix) const;

  // Stops at EOS or max_new_tokens. `trace`, when given, receives one record
  // per emitted token with the top `trace_width` adjusted probabilities.
  GenerateResult generate(std::span<const TokenId> prompt, std::vector<StepTrace>* trace = nullptr,
                          std::size_t trace_width = 5) const;

 private:
  const LogitSource& base_;
  const LogitSource& forget_;
  const LogitSource& retain_;
  DecodeConfig config_;
};

// Greedy continuation of exactly `n` tokens (no EOS stop).
TokenSeq greedy_continuation(const TokenScorer& scorer, std::span<const TokenId> prompt, std::size_t n);

}  // namespace divdec
