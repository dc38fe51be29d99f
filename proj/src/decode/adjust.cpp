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

void check_inputs(std::span<const double> base, std::span<const double> forget_side,
                  std::span<const double> retain_side) {
  if (base.size() != forget_side.size() || base.size() != retain_side.size()) {
    throw UsageError(fmt::format("logit length mismatch: base {}, forget {}, retain {}", base.size(),
                                 forget_side.size(), retain_side.size()));
  }
  for (std::size_t v = 0; v < base.size(); ++v) {
    if (!std::isfinite(forget_side[v]) || !std::isfinite(retain_side[v])) {
      throw DataError(fmt::format("auxiliary logit for token {} is not finite", v));
    }
  }
}

}  // namespace

LogitVector linear_adjust(std::span<const double> base, std::span<const double> forget_side,
                          std::span<const double> retain_side, double alpha) {
  check_inputs(base, forget_side, retain_side);
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw UsageError(fmt::format("alpha must be finite and non-negative, got {}", alpha));
  }
  LogitVector out(base.begin(), base.end());
  if (alpha == 0.0) return out;
  for (std::size_t v = 0; v < out.size(); ++v) out[v] += alpha * (retain_side[v] - forget_side[v]);
  return out;
}

std::vector<TokenId> most_divergent(std::span<const double> forget_side,
                                    std::span<const double> retain_side, std::size_t k) {
  const std::size_t n = forget_side.size();
  k = std::min(k, n);
  std::vector<double> d(n);
  for (std::size_t v = 0; v < n; ++v) d[v] = forget_side[v] - retain_side[v];
  std::vector<TokenId> ids(n);
  std::iota(ids.begin(), ids.end(), TokenId{0});
  auto before = [&](TokenId a, TokenId b) { return d[a] > d[b] || (d[a] == d[b] && a < b); };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), before);
  ids.resize(k);
  return ids;
}

LogitVector rank_adjust(std::span<const double> base, std::span<const double> forget_side,
                        std::span<const double> retain_side, std::size_t k) {
  check_inputs(base, forget_side, retain_side);
  if (k >= base.size()) {
    throw UsageError(fmt::format("rank k={} must be below the vocabulary size {}", k, base.size()));
  }
  LogitVector out(base.begin(), base.end());
  for (TokenId v : most_divergent(forget_side, retain_side, k)) {
    out[v] = -std::numeric_limits<double>::infinity();
  }
  return out;
}

LogitVector apply_adjustment(const Adjustment& mode, std::span<const double> base,
                             std::span<const double> forget_side, std::span<const double> retain_side) {
  return std::visit(
      [&](const auto& m) -> LogitVector {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LinearAdjust>) {
          return linear_adjust(base, forget_side, retain_side, m.alpha);
        } else if constexpr (std::is_same_v<M, RankAdjust>) {
          return rank_adjust(base, forget_side, retain_side, m.k);
        } else {
          check_inputs(base, forget_side, retain_side);
          return LogitVector(base.begin(), base.end());
        }
      },
      mode);
}

}  // namespace divdec
