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

#include "divdec/common.hpp"
#include "divdec/cost.hpp"

namespace divdec {

void CostParams::validate() const {
  const double fields[] = {large_params, small_params, large_epochs, small_epochs,
                           retain_tokens, forget_tokens, inference_tokens};
  for (double f : fields) {
    if (!(f >= 0.0) || !std::isfinite(f)) throw UsageError("cost parameters must be finite and >= 0");
  }
  if (!(large_params > 0.0)) throw UsageError("large model parameter count must be positive");
}

InferenceFlops inference_flops(double large_params, double small_params, double inference_tokens) {
  if (!(large_params > 0.0) || small_params < 0.0 || inference_tokens < 0.0) {
    throw UsageError("inference_flops needs N > 0, n >= 0, I >= 0");
  }
  return {2.0 * large_params * inference_tokens,
          2.0 * (large_params + 2.0 * small_params) * inference_tokens};
}

double breakeven_tokens(const CostParams& p) {
  p.validate();
  if (p.small_params == 0.0) throw UsageError("breakeven needs a positive small-model size");
  const double ratio = p.large_params / p.small_params;
  return 3.0 * ratio * p.large_epochs * p.forget_tokens / 2.0 -
         3.0 * p.small_epochs * (p.retain_tokens + p.forget_tokens) / 2.0;
}

bool dd_cheaper(const CostParams& p) { return p.inference_tokens < breakeven_tokens(p); }

TotalCost total_cost(const CostParams& p) {
  p.validate();
  return total_cost(p, p.inference_tokens);
}

TotalCost total_cost(const CostParams& p, double inference_tokens) {
  const double N = p.large_params;
  const double n = p.small_params;
  const double I = inference_tokens;
  return {6.0 * n * p.small_epochs * (p.retain_tokens + p.forget_tokens) + 2.0 * (N + 2.0 * n) * I,
          6.0 * N * p.large_epochs * p.forget_tokens + 2.0 * N * I};
}

}  // namespace divdec
