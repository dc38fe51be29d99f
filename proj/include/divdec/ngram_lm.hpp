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

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "divdec/common.hpp"

namespace divdec {

/// A model that scores every vocabulary entry given a token prefix.
///
/// Entries are log-probabilities up to a per-prefix additive constant and are
/// always finite. Implementations are immutable once built, so a single
/// instance may be queried from many threads.
class LogitSource {
 public:
  virtual ~LogitSource() = default;

  virtual std::size_t vocab_size() const = 0;

  // `out.size()` must equal vocab_size().
  virtual void logits_into(std::span<const TokenId> prefix, std::span<double> out) const = 0;

  LogitVector logits(std::span<const TokenId> prefix) const {
    LogitVector out(vocab_size());
    logits_into(prefix, out);
    return out;
  }
};

struct ContextHash {
  using is_transparent = void;
  std::size_t operator()(std::span<const TokenId> ctx) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (TokenId t : ctx) {
      h ^= t;
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h ^ ctx.size());
  }
  std::size_t operator()(const std::vector<TokenId>& ctx) const noexcept {
    return (*this)(std::span<const TokenId>(ctx));
  }
};

struct ContextEqual {
  using is_transparent = void;
  bool operator()(std::span<const TokenId> a, std::span<const TokenId> b) const noexcept {
    return std::equal(a.begin(), a.end(), b.begin(), b.end());
  }
};

/// Per-order n-gram counts. Table n (1-based) maps contexts of length n-1 to
/// the tokens observed after them.
class NGramCounts {
 public:
  struct Children {
    std::vector<std::pair<TokenId, std::uint64_t>> entries;  // sorted by token
    std::uint64_t total = 0;                                 // sum of entry counts

    std::uint64_t count(TokenId token) const;
  };
  using Table = std::unordered_map<std::vector<TokenId>, Children, ContextHash, ContextEqual>;

  explicit NGramCounts(std::size_t order);

  std::size_t order() const { return tables_.size(); }
  const Table& table(std::size_t n) const { return tables_.at(n - 1); }

  // Unigram denominator: every predicted token, so BOS never counts.
  std::uint64_t total_tokens() const { return total_tokens_; }

  const Children* find(std::span<const TokenId> context) const;
  std::uint64_t count(std::span<const TokenId> context, TokenId token) const;

  // Builders. `add` accumulates; `finalize` must run before queries.
  void add(std::span<const TokenId> context, TokenId token, std::uint64_t count);
  void finalize();

  TokenId max_token() const;

 private:
  std::vector<Table> tables_;
  std::uint64_t total_tokens_ = 0;
};

// Counts every order 1..order over all windows of each sentence after
// replacing its leading BOS (if any) with order-1 BOS tokens.
NGramCounts train_counts(std::span<const TokenSeq> corpus, std::size_t order);

/// Stupid Backoff scorer over NGramCounts.
///
/// S(w|c) = count(c w) / count(c) at the longest context with count(c w) > 0,
/// times lambda for every order dropped; the unigram level uses total_tokens.
/// A token never seen at all scores floor_score regardless of context. Scores
/// are not normalized.
class BackoffLM final : public LogitSource {
 public:
  static constexpr double kDefaultLambda = 0.4;

  // floor_score defaults to 1 / (total_tokens * vocab_size).
  BackoffLM(NGramCounts counts, std::size_t vocab_size, double lambda = kDefaultLambda);
  BackoffLM(NGramCounts counts, std::size_t vocab_size, double lambda, double floor_score);

  std::size_t order() const { return counts_.order(); }
  double lambda() const { return lambda_; }
  double floor_score() const { return floor_score_; }
  const NGramCounts& counts() const { return counts_; }

  // Contexts longer than order-1 are cut to their trailing order-1 tokens.
  double score(std::span<const TokenId> context, TokenId token) const;

  std::size_t vocab_size() const override { return vocab_size_; }

  // Entry v is ln S(v | last order-1 tokens of the BOS-padded prefix).
  void logits_into(std::span<const TokenId> prefix, std::span<double> out) const override;

 private:
  void init();
  double backed_off(double value, std::size_t drops) const;

  NGramCounts counts_;
  std::size_t vocab_size_;
  double lambda_;
  double floor_score_;
  // ln S at the unigram level for a full-length context.
  std::vector<double> unigram_logits_;
};

inline double sb_score(const BackoffLM& lm, std::span<const TokenId> context, TokenId token) {
  return lm.score(context, token);
}

class FormatError : public DataError {
 public:
  enum class Reason { truncated, bad_magic, version, checksum, malformed };
  FormatError(Reason reason, const std::string& what) : DataError(what), reason_(reason) {}
  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

inline constexpr std::string_view kModelMagic = "DIVDEC-NGRAM";
inline constexpr std::uint32_t kModelVersion = 1;

// Little-endian binary: magic, u32 version, payload, u64 FNV-1a checksum of
// the payload. Tables are written in sorted (context, token) order, so equal
// models produce byte-identical files.
void save_lm(const BackoffLM& lm, const std::filesystem::path& path);
BackoffLM load_lm(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_lm(const BackoffLM& lm);
BackoffLM deserialize_lm(std::span<const std::uint8_t> bytes);

}  // namespace divdec
