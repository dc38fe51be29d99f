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

namespace divdec {

// Compute model for steering a large model with two small auxiliaries versus
// unregularized gradient-ascent unlearning. Everything is in FLOPs and tokens,
// as doubles since parameter counts overflow 32 bits.
struct CostParams {
  double large_params = 0.0;   // N
  double small_params = 0.0;   // n, per auxiliary model
  double large_epochs = 1.0;   // e_N
  double small_epochs = 1.0;   // e_n
  double retain_tokens = 0.0;  // d_r
  double forget_tokens = 0.0;  // d_f
  double inference_tokens = 0.0;  // I

  void validate() const;
};

struct InferenceFlops {
  double base = 0.0;  // 2 N I
  double dd = 0.0;    // 2 (N + 2n) I
  double overhead_fraction() const { return base == 0.0 ? 0.0 : dd / base - 1.0; }
};

InferenceFlops inference_flops(double large_params, double small_params, double inference_tokens);

// I* = 3 N e_N d_f / (2 n) - 3 e_n (d_r + d_f) / 2. Negative means divergence
// decoding is cheaper at every inference volume. Throws UsageError if n == 0.
double breakeven_tokens(const CostParams& p);

// True when p.inference_tokens < I*.
bool dd_cheaper(const CostParams& p);

// Both sides of the cost comparison at p.inference_tokens:
//   dd = 6 n e_n (d_r + d_f) + 2 (N + 2n) I
//   ga = 6 N e_N d_f + 2 N I
struct TotalCost {
  double dd = 0.0;
  double gradient_ascent = 0.0;
};
TotalCost total_cost(const CostParams& p);
// Unchecked variant at an explicit inference volume, which may be negative.
TotalCost total_cost(const CostParams& p, double inference_tokens);

}  // namespace divdec
