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

#include <fmt/format.h>

#include "divdec/corpus.hpp"
#include "divdec/ngram_lm.hpp"

namespace divdec {

BackoffLM::BackoffLM(NGramCounts counts, std::size_t vocab_size, double lambda)
    : counts_(std::move(counts)), vocab_size_(vocab_size), lambda_(lambda), floor_score_(0.0) {
  if (counts_.total_tokens() > 0 && vocab_size_ > 0) {
    floor_score_ = 1.0 / (static_cast<double>(counts_.total_tokens()) * static_cast<double>(vocab_size_));
  }
  init();
}

BackoffLM::BackoffLM(NGramCounts counts, std::size_t vocab_size, double lambda, double floor_score)
    : counts_(std::move(counts)), vocab_size_(vocab_size), lambda_(lambda), floor_score_(floor_score) {
  init();
}

void BackoffLM::init() {
  if (!(lambda_ > 0.0 && lambda_ <= 1.0)) {
    throw UsageError(fmt::format("backoff factor {} outside (0, 1]", lambda_));
  }
  if (!(floor_score_ > 0.0) || !std::isfinite(floor_score_)) {
    throw DataError("floor score must be finite and strictly positive");
  }
  if (counts_.total_tokens() == 0) throw DataError("n-gram model has no unigram counts");
  if (counts_.max_token() >= vocab_size_) {
    throw DataError(fmt::format("n-gram counts reference token {} but vocabulary has {} entries",
                                counts_.max_token(), vocab_size_));
  }

  const std::size_t drops = counts_.order() - 1;
  const double total = static_cast<double>(counts_.total_tokens());
  unigram_logits_.assign(vocab_size_, std::log(floor_score_));
  const auto* uni = counts_.find({});
  for (const auto& [tok, c] : uni->entries) {
    unigram_logits_[tok] = std::log(backed_off(static_cast<double>(c) / total, drops));
  }
}

// Applies one multiplication per dropped order, innermost first, matching the
// recursive definition bit for bit.
double BackoffLM::backed_off(double value, std::size_t drops) const {
  for (std::size_t i = 0; i < drops; ++i) value *= lambda_;
  return value;
}

double BackoffLM::score(std::span<const TokenId> context, TokenId token) const {
  if (context.size() + 1 > counts_.order()) context = context.last(counts_.order() - 1);
  const auto* uni = counts_.find({});
  const std::uint64_t uc = uni->count(token);
  if (uc == 0) return floor_score_;

  for (std::size_t len = context.size(); len > 0; --len) {
    const auto* node = counts_.find(context.last(len));
    if (node == nullptr) continue;
    const std::uint64_t c = node->count(token);
    if (c > 0) {
      return backed_off(static_cast<double>(c) / static_cast<double>(node->total),
                        context.size() - len);
    }
  }
  return backed_off(static_cast<double>(uc) / static_cast<double>(counts_.total_tokens()),
                    context.size());
}

void BackoffLM::logits_into(std::span<const TokenId> prefix, std::span<double> out) const {
  if (out.size() != vocab_size_) {
    throw UsageError(fmt::format("logit buffer has {} entries, vocabulary has {}", out.size(), vocab_size_));
  }
  std::copy(unigram_logits_.begin(), unigram_logits_.end(), out.begin());

  const std::size_t width = counts_.order() - 1;
  if (width == 0) return;

  // Left-pad with BOS so short prefixes see the same contexts as training.
  TokenId ctx_buf[16];
  std::vector<TokenId> ctx_heap;
  TokenId* ctx = ctx_buf;
  if (width > std::size(ctx_buf)) {
    ctx_heap.resize(width);
    ctx = ctx_heap.data();
  }
  std::span<const TokenId> body = prefix;
  if (!body.empty() && body.front() == Vocabulary::kBos) body = body.subspan(1);
  const std::size_t take = std::min(width, body.size());
  std::fill(ctx, ctx + (width - take), Vocabulary::kBos);
  std::copy(body.end() - static_cast<std::ptrdiff_t>(take), body.end(), ctx + (width - take));

  // Shorter contexts first so longer matches overwrite them.
  for (std::size_t len = 1; len <= width; ++len) {
    const auto* node = counts_.find(std::span<const TokenId>(ctx + (width - len), len));
    if (node == nullptr) continue;
    const double denom = static_cast<double>(node->total);
    for (const auto& [tok, c] : node->entries) {
      out[tok] = std::log(backed_off(static_cast<double>(c) / denom, width - len));
    }
  }
}

}  // namespace divdec
