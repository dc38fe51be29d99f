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
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "divdec/decode.hpp"

namespace divdec {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool any_finite(std::span<const double> logits) {
  return std::any_of(logits.begin(), logits.end(), [](double x) { return x != kNegInf; });
}

// Ids ordered by value descending, ties to the lower id.
std::vector<TokenId> ranked_ids(std::span<const double> values) {
  std::vector<TokenId> ids(values.size());
  std::iota(ids.begin(), ids.end(), TokenId{0});
  std::stable_sort(ids.begin(), ids.end(), [&](TokenId a, TokenId b) { return values[a] > values[b]; });
  return ids;
}

}  // namespace

void DecodeConfig::validate(std::size_t vocab_size) const {
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LinearAdjust>) {
          if (!(m.alpha >= 0.0) || !std::isfinite(m.alpha)) {
            throw UsageError(fmt::format("alpha must be finite and non-negative, got {}", m.alpha));
          }
        } else if constexpr (std::is_same_v<M, RankAdjust>) {
          if (vocab_size != 0 && m.k >= vocab_size) {
            throw UsageError(fmt::format("rank k={} must be below the vocabulary size {}", m.k, vocab_size));
          }
        }
      },
      mode);
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw UsageError(fmt::format("temperature must be finite and >= 0, got {}", temperature));
  }
  if (const auto* tk = std::get_if<TopK>(&truncation); tk != nullptr && tk->m == 0) {
    throw UsageError("top-k truncation needs m >= 1");
  }
  if (const auto* tp = std::get_if<TopP>(&truncation); tp != nullptr && !(tp->p > 0.0 && tp->p <= 1.0)) {
    throw UsageError(fmt::format("top-p must lie in (0, 1], got {}", tp->p));
  }
  if (max_new_tokens == 0) throw UsageError("max_new_tokens must be positive");
}

std::string adjustment_label(const Adjustment& mode) {
  return std::visit(
      [](const auto& m) -> std::string {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LinearAdjust>) {
          return fmt::format("linear:alpha={}", m.alpha);
        } else if constexpr (std::is_same_v<M, RankAdjust>) {
          return fmt::format("rank:k={}", m.k);
        } else {
          return "none";
        }
      },
      mode);
}

std::string DecodeConfig::label() const { return adjustment_label(mode); }

double log_sum_exp(std::span<const double> logits) {
  double hi = kNegInf;
  for (double x : logits) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double x : logits) {
    if (x != kNegInf) sum += std::exp(x - hi);
  }
  return hi + std::log(sum);
}

ProbVector softmax(std::span<const double> logits) {
  ProbVector out(logits.size(), 0.0);
  double hi = kNegInf;
  for (double x : logits) hi = std::max(hi, x);
  if (hi == kNegInf) throw DataError("softmax over a fully masked vector");
  double sum = 0.0;
  for (std::size_t v = 0; v < logits.size(); ++v) {
    if (logits[v] != kNegInf) {
      out[v] = std::exp(logits[v] - hi);
      sum += out[v];
    }
  }
  for (double& p : out) p /= sum;
  return out;
}

TokenId argmax(std::span<const double> logits) {
  if (!any_finite(logits)) throw DataError("argmax over a fully masked vector");
  TokenId best = 0;
  for (std::size_t v = 1; v < logits.size(); ++v) {
    if (logits[v] > logits[best]) best = static_cast<TokenId>(v);
  }
  return best;
}

ProbVector sampling_distribution(std::span<const double> logits, const DecodeConfig& cfg) {
  if (!any_finite(logits)) throw DataError("every token is masked; nothing to sample");
  if (cfg.greedy()) {
    ProbVector one_hot(logits.size(), 0.0);
    one_hot[argmax(logits)] = 1.0;
    return one_hot;
  }

  LogitVector scaled(logits.begin(), logits.end());
  for (double& x : scaled) {
    if (x != kNegInf) x /= cfg.temperature;
  }

  if (const auto* tk = std::get_if<TopK>(&cfg.truncation); tk != nullptr && tk->m < scaled.size()) {
    const auto order = ranked_ids(scaled);
    for (std::size_t i = tk->m; i < order.size(); ++i) scaled[order[i]] = kNegInf;
  }

  ProbVector probs = softmax(scaled);

  if (const auto* tp = std::get_if<TopP>(&cfg.truncation); tp != nullptr && tp->p < 1.0) {
    const auto order = ranked_ids(probs);
    double cum = 0.0;
    std::size_t keep = 0;
    while (keep < order.size() && probs[order[keep]] > 0.0) {
      cum += probs[order[keep]];
      ++keep;
      if (cum >= tp->p) break;
    }
    for (std::size_t i = keep; i < order.size(); ++i) probs[order[i]] = 0.0;
    double kept = 0.0;
    for (double p : probs) kept += p;
    for (double& p : probs) p /= kept;
  }
  return probs;
}

TokenId sample_next(std::span<const double> logits, const DecodeConfig& cfg, Rng& rng) {
  if (cfg.greedy()) return argmax(logits);
  const ProbVector probs = sampling_distribution(logits, cfg);
  const double u = rng.uniform();
  double cum = 0.0;
  TokenId last = 0;
  for (std::size_t v = 0; v < probs.size(); ++v) {
    if (probs[v] <= 0.0) continue;
    cum += probs[v];
    last = static_cast<TokenId>(v);
    if (u < cum) return last;
  }
  // Rounding left cum a hair below u.
  return last;
}

}  // namespace divdec
