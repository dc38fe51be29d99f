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
#include <random>

#include <fmt/format.h>

#include "divdec/eval.hpp"
#include "divdec/poe.hpp"

namespace divdec {

std::string_view to_string(ProbeKind kind) {
  return kind == ProbeKind::verbatim ? "verbatim" : "cloze";
}

ProbeKind parse_probe_kind(std::string_view text) {
  if (text == "verbatim") return ProbeKind::verbatim;
  if (text == "cloze") return ProbeKind::cloze;
  throw UsageError(fmt::format("unknown probe kind '{}'", text));
}

PerplexityResult perplexity(const TokenScorer& scorer, std::span<const TokenSeq> corpus, double log_floor) {
  if (corpus.empty()) throw UsageError("perplexity needs a non-empty corpus");
  PerplexityResult result;
  double nll = 0.0;
  for (const TokenSeq& seq : corpus) {
    if (seq.empty() || seq.front() != Vocabulary::kBos) {
      throw UsageError("perplexity sequences must start with BOS");
    }
    for (std::size_t i = 1; i < seq.size(); ++i) {
      const TokenId target = seq[i];
      if (target == Vocabulary::kBos) continue;
      const LogitVector logits = scorer.next_logits(std::span<const TokenId>(seq.data(), i));
      if (target >= logits.size()) {
        throw DataError(fmt::format("token id {} outside vocabulary of size {}", target, logits.size()));
      }
      double lp = logits[target] - log_sum_exp(logits);
      if (!std::isfinite(lp)) {
        lp = log_floor;
        ++result.clipped;
      }
      nll -= lp;
      ++result.predicted;
    }
  }
  if (result.predicted == 0) throw UsageError("perplexity corpus has no predictable tokens");
  result.perplexity = std::exp(nll / static_cast<double>(result.predicted));
  return result;
}

bool extracts(const TokenScorer& scorer, const FactRecord& fact, ProbeKind probe) {
  const TokenSeq& prompt = probe == ProbeKind::verbatim ? fact.verbatim_prompt : fact.cloze_prompt;
  return greedy_continuation(scorer, prompt, fact.answer.size()) == fact.answer;
}

double extraction_rate(const TokenScorer& scorer, std::span<const FactRecord> facts, ProbeKind probe) {
  if (facts.empty()) throw UsageError("extraction rate needs at least one fact");
  std::size_t hits = 0;
  for (const FactRecord& fact : facts) hits += extracts(scorer, fact, probe) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(facts.size());
}

RetrainGap retrain_gap(const DivergenceDecoder& dec, const LogitSource& retrain,
                       std::span<const TokenSeq> prefixes) {
  if (prefixes.empty()) throw UsageError("retrain gap needs at least one prefix");
  if (retrain.vocab_size() != dec.vocab_size()) throw UsageError("retrain model vocabulary differs");
  RetrainGap gap;
  for (const TokenSeq& prefix : prefixes) {
    const ProbVector q = softmax(retrain.logits(prefix));
    const ProbVector adjusted = dec.adjusted_distribution(prefix);
    const ProbVector base = softmax(dec.base().logits(prefix));
    gap.kl_adjusted += kl_divergence_clipped(q, adjusted, kLogFloor, &gap.clipped);
    gap.kl_base += kl_divergence_clipped(q, base, kLogFloor);
  }
  gap.kl_adjusted /= static_cast<double>(prefixes.size());
  gap.kl_base /= static_cast<double>(prefixes.size());
  return gap;
}

std::vector<TokenSeq> sample_prefixes(std::span<const TokenSeq> docs, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].size() >= 3 && docs[i].front() == Vocabulary::kBos) usable.push_back(i);
  }
  if (usable.empty()) throw UsageError("no document long enough to cut prefixes from");
  std::mt19937_64 rng(seed);
  std::vector<TokenSeq> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TokenSeq& doc = docs[usable[rng() % usable.size()]];
    // Length in [2, size - 1]: never ends on the final token.
    const std::size_t len = 2 + rng() % (doc.size() - 2);
    out.emplace_back(doc.begin(), doc.begin() + static_cast<std::ptrdiff_t>(len));
  }
  return out;
}

const MetricPoint& EvalReport::point(std::string_view label) const {
  if (label == target.config_label) return target;
  if (label == retrain.config_label) return retrain;
  for (const MetricPoint& p : points) {
    if (p.config_label == label) return p;
  }
  throw UsageError(fmt::format("report has no point labelled '{}'", label));
}

}  // namespace divdec
