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
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "divdec/eval.hpp"

namespace divdec {
namespace {

void check_assets(const SweepAssets& a) {
  if (a.base == nullptr || a.forget_side == nullptr || a.retain_side == nullptr || a.retrain == nullptr) {
    throw UsageError("sweep needs base, forget-side, retain-side and retrain models");
  }
  if (a.retrain->vocab_size() != a.base->vocab_size()) {
    throw UsageError("retrain model vocabulary differs from the base model");
  }
  if (a.forget_facts.empty() || a.retain_facts.empty()) {
    throw UsageError("sweep needs forget and retain facts");
  }
  if (a.utility_corpus.empty()) throw UsageError("sweep needs a utility corpus");
}

// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first
// failure.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

MetricPoint evaluate_point(const TokenScorer& scorer, std::string label, const SweepAssets& assets) {
  MetricPoint p;
  p.config_label = std::move(label);
  p.probe_kind = assets.probe;
  p.forget_metric = extraction_rate(scorer, assets.forget_facts, assets.probe);
  p.retain_metric = extraction_rate(scorer, assets.retain_facts, assets.probe);
  if (!assets.original_forget_facts.empty()) {
    p.original_forget_metric = extraction_rate(scorer, assets.original_forget_facts, assets.probe);
  }
  const PerplexityResult ppl = perplexity(scorer, assets.utility_corpus);
  p.utility_metric = ppl.perplexity;
  p.clip_count = ppl.clipped;
  return p;
}

EvalReport sweep(const SweepAssets& assets, std::span<const DecodeConfig> grid) {
  check_assets(assets);
  if (grid.empty()) throw UsageError("sweep grid is empty");
  for (const DecodeConfig& cfg : grid) cfg.validate(assets.base->vocab_size());

  EvalReport report;
  report.points.resize(grid.size());
  // Jobs 0 and 1 are the target and retrain points.
  parallel_for(grid.size() + 2, assets.threads, [&](std::size_t job) {
    if (job == 0) {
      report.target = evaluate_point(SourceScorer(*assets.base), std::string(kTargetLabel), assets);
    } else if (job == 1) {
      report.retrain = evaluate_point(SourceScorer(*assets.retrain), std::string(kRetrainLabel), assets);
    } else {
      const DecodeConfig& cfg = grid[job - 2];
      const DivergenceDecoder dec(*assets.base, *assets.forget_side, *assets.retain_side, cfg);
      report.points[job - 2] = evaluate_point(dec, cfg.label(), assets);
    }
  });
  report.best = select_best(report);
  return report;
}

std::vector<double> rescaled_distances(const EvalReport& report) {
  const auto scale = [](bool enabled, double target_value, std::string_view axis) {
    if (!enabled) return 1.0;
    if (target_value == 0.0) {
      throw DataError(fmt::format("target {} coordinate is zero; cannot rescale", axis));
    }
    return target_value;
  };
  const double fs = scale(report.rescale_forget, report.target.forget_metric, "forget");
  const double us = scale(report.rescale_utility, report.target.utility_metric, "utility");
  const double rf = report.retrain.forget_metric / fs;
  const double ru = report.retrain.utility_metric / us;
  std::vector<double> out;
  out.reserve(report.points.size());
  for (const MetricPoint& p : report.points) {
    out.push_back(std::hypot(p.forget_metric / fs - rf, p.utility_metric / us - ru));
  }
  return out;
}

std::string select_best(const EvalReport& report) {
  if (report.points.empty()) throw UsageError("report has no configuration points");
  const std::vector<double> dist = rescaled_distances(report);
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    if (dist[i] < dist[best] ||
        (dist[i] == dist[best] && report.points[i].config_label < report.points[best].config_label)) {
      best = i;
    }
  }
  return report.points[best].config_label;
}

std::vector<DecodeConfig> trigram_grid() {
  std::vector<DecodeConfig> grid;
  for (int a = 5; a <= 30; a += 5) grid.push_back({.mode = LinearAdjust{static_cast<double>(a)}});
  for (std::size_t k : {1, 2, 3, 5, 10}) grid.push_back({.mode = RankAdjust{k}});
  return grid;
}

std::vector<DecodeConfig> lm_grid() {
  std::vector<DecodeConfig> grid;
  for (int tenths = 5; tenths <= 15; ++tenths) grid.push_back({.mode = LinearAdjust{tenths / 10.0}});
  for (std::size_t k : {1, 5, 20, 50, 100, 200, 500, 1000}) grid.push_back({.mode = RankAdjust{k}});
  return grid;
}

}  // namespace divdec
