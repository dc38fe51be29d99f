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

#include <span>

#include "divdec/common.hpp"

namespace divdec {

// Probability-space product of experts:
//   out[v] = base[v] * (retain_side[v] / forget_side[v])^alpha / Z
// evaluated as exp of max-shifted log sums. forget_side must be strictly
// positive; base may contain zeros (they stay zero).
ProbVector poe_distribution(std::span<const double> base, std::span<const double> forget_side,
                            std::span<const double> retain_side, double alpha);

// sum a[v] ln(a[v] / b[v]) with 0 ln 0 = 0. Throws DataError when b[v] == 0
// while a[v] > 0.
double kl_divergence(std::span<const double> a, std::span<const double> b);

// Same, but a zero b[v] under positive a[v] contributes ln(b) := log_floor
// and bumps *clipped.
double kl_divergence_clipped(std::span<const double> a, std::span<const double> b, double log_floor,
                             std::size_t* clipped = nullptr);

}  // namespace divdec
