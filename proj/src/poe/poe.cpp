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

#include <cassert>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "divdec/poe.hpp"

namespace divdec {

ProbVector poe_distribution(std::span<const double> base, std::span<const double> forget_side,
                            std::span<const double> retain_side, double alpha) {
  const std::size_t n = base.size();
  if (forget_side.size() != n || retain_side.size() != n) {
    throw UsageError("probability vectors differ in length");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw UsageError(fmt::format("alpha must be finite and non-negative, got {}", alpha));
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (!(forget_side[v] > 0.0)) {
      throw DataError(fmt::format("forget-side probability of token {} is not positive", v));
    }
  }
  if (alpha == 0.0) return ProbVector(base.begin(), base.end());

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> log_terms(n, kNegInf);
  double hi = kNegInf;
  for (std::size_t v = 0; v < n; ++v) {
    if (base[v] <= 0.0) continue;
    log_terms[v] = std::log(base[v]) + alpha * (std::log(retain_side[v]) - std::log(forget_side[v]));
    hi = std::max(hi, log_terms[v]);
  }
  if (hi == kNegInf) throw DataError("base distribution has no mass");

  ProbVector out(n, 0.0);
  double z = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    if (log_terms[v] == kNegInf) continue;
    out[v] = std::exp(log_terms[v] - hi);
    z += out[v];
  }
  // The max term contributes exp(0) = 1, so Z >= 1 after the shift.
  assert(z >= 1.0);
  if (!(z > 0.0)) throw DataError("normalizer underflowed");
  for (double& p : out) p /= z;
  return out;
}

double kl_divergence(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("distributions differ in length");
  double kl = 0.0;
  for (std::size_t v = 0; v < a.size(); ++v) {
    if (a[v] <= 0.0) continue;
    if (b[v] <= 0.0) {
      throw DataError(fmt::format("support violation at token {}: a > 0 but b = 0", v));
    }
    kl += a[v] * (std::log(a[v]) - std::log(b[v]));
  }
  return std::max(kl, 0.0);
}

double kl_divergence_clipped(std::span<const double> a, std::span<const double> b, double log_floor,
                             std::size_t* clipped) {
  if (a.size() != b.size()) throw UsageError("distributions differ in length");
  double kl = 0.0;
  for (std::size_t v = 0; v < a.size(); ++v) {
    if (a[v] <= 0.0) continue;
    double log_b = 0.0;
    if (b[v] > 0.0) {
      log_b = std::log(b[v]);
    } else {
      log_b = log_floor;
      if (clipped != nullptr) ++*clipped;
    }
    kl += a[v] * (std::log(a[v]) - log_b);
  }
  return kl;
}

}  // namespace divdec
