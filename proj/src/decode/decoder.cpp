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

#include <algorithm>

#include <fmt/format.h>

#include "divdec/corpus.hpp"
#include "divdec/decode.hpp"

namespace divdec {

DivergenceDecoder::DivergenceDecoder(const LogitSource& base, const LogitSource& forget_side,
                                     const LogitSource& retain_side, DecodeConfig config)
    : base_(base), forget_(forget_side), retain_(retain_side), config_(std::move(config)) {
  if (forget_.vocab_size() != base_.vocab_size() || retain_.vocab_size() != base_.vocab_size()) {
    throw UsageError(fmt::format("sources disagree on vocabulary size: base {}, forget {}, retain {}",
                                 base_.vocab_size(), forget_.vocab_size(), retain_.vocab_size()));
  }
  config_.validate(base_.vocab_size());
}

LogitVector DivergenceDecoder::adjusted_logits(std::span<const TokenId> prefix, std::size_t* queries) const {
  const std::size_t n = vocab_size();
  LogitVector base(n), forget(n), retain(n);
  base_.logits_into(prefix, base);
  forget_.logits_into(prefix, forget);
  retain_.logits_into(prefix, retain);
  if (queries != nullptr) *queries += 3;
  return apply_adjustment(config_.mode, base, forget, retain);
}

ProbVector DivergenceDecoder::adjusted_distribution(std::span<const TokenId> prefix) const {
  return softmax(adjusted_logits(prefix));
}

GenerateResult DivergenceDecoder::generate(std::span<const TokenId> prompt, std::vector<StepTrace>* trace,
                                           std::size_t trace_width) const {
  if (prompt.empty() || prompt.front() != Vocabulary::kBos) {
    throw UsageError("generation prompt must begin with BOS");
  }
  GenerateResult result;
  Rng rng(config_.seed);
  TokenSeq context(prompt.begin(), prompt.end());
  for (std::size_t step = 0; step < config_.max_new_tokens; ++step) {
    const LogitVector logits = adjusted_logits(context, &result.source_queries);
    const TokenId next = sample_next(logits, config_, rng);
    if (trace != nullptr) {
      StepTrace rec;
      rec.step = step;
      rec.chosen = next;
      const ProbVector probs = softmax(logits);
      std::vector<TokenId> ids(probs.size());
      for (std::size_t v = 0; v < ids.size(); ++v) ids[v] = static_cast<TokenId>(v);
      const std::size_t width = std::min(trace_width, ids.size());
      std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(width), ids.end(),
                        [&](TokenId a, TokenId b) { return probs[a] > probs[b] || (probs[a] == probs[b] && a < b); });
      for (std::size_t i = 0; i < width; ++i) rec.top.emplace_back(ids[i], probs[ids[i]]);
      trace->push_back(std::move(rec));
    }
    result.tokens.push_back(next);
    context.push_back(next);
    if (next == Vocabulary::kEos) break;
  }
  return result;
}

TokenSeq greedy_continuation(const TokenScorer& scorer, std::span<const TokenId> prompt, std::size_t n) {
  TokenSeq context(prompt.begin(), prompt.end());
  TokenSeq out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TokenId next = argmax(scorer.next_logits(context));
    out.push_back(next);
    context.push_back(next);
  }
  return out;
}

}  // namespace divdec
