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
#include <set>
#include <unordered_set>

#include <fmt/format.h>

#include "divdec/eval.hpp"

namespace divdec {

std::string_view to_string(ScenarioKind kind) {
  return kind == ScenarioKind::sustainability ? "sustainability" : "scaling";
}

ScenarioKind parse_scenario_kind(std::string_view text) {
  if (text == "sustainability") return ScenarioKind::sustainability;
  if (text == "scaling") return ScenarioKind::scaling;
  throw UsageError(fmt::format("unknown scenario kind '{}'", text));
}

void Scenario::validate() const {
  if (steps.empty()) throw UsageError("scenario has no steps");
  if (!remeasure_original) throw UsageError("scenarios always re-measure the original forget set");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].empty()) throw UsageError(fmt::format("scenario step {} is empty", i + 1));
    if (kind == ScenarioKind::sustainability) {
      for (const std::string& id : steps[i]) {
        if (!seen.insert(id).second) {
          throw UsageError(fmt::format("fact '{}' appears in more than one sustainability step", id));
        }
      }
    }
  }
}

std::vector<std::string> Scenario::forget_ids(std::size_t step) const {
  if (step >= steps.size()) throw UsageError(fmt::format("scenario has no step {}", step + 1));
  if (kind == ScenarioKind::scaling) return steps[step];
  std::vector<std::string> ids;
  for (std::size_t i = 0; i <= step; ++i) ids.insert(ids.end(), steps[i].begin(), steps[i].end());
  return ids;
}

namespace {

std::vector<FactRecord> select_facts(std::span<const FactRecord> facts, std::span<const std::string> ids) {
  std::vector<FactRecord> out;
  for (const std::string& id : ids) {
    auto it = std::find_if(facts.begin(), facts.end(), [&](const FactRecord& f) { return f.fact_id == id; });
    if (it == facts.end()) throw DataError(fmt::format("scenario names unknown fact '{}'", id));
    if (it->split != FactSplit::forget) {
      throw DataError(fmt::format("scenario fact '{}' is not in the forget split", id));
    }
    out.push_back(*it);
  }
  return out;
}

}  // namespace

std::vector<EvalReport> run_scenario(const Scenario& scenario, const ScenarioAssets& assets,
                                     std::span<const DecodeConfig> grid) {
  scenario.validate();
  if (assets.base == nullptr || assets.retain_side == nullptr || assets.retrain == nullptr) {
    throw UsageError("scenario needs base, retain-side and retrain models");
  }
  if (assets.vocab_size != assets.base->vocab_size()) {
    throw UsageError("scenario vocabulary size differs from the base model");
  }

  std::vector<FactRecord> retain_facts;
  for (const FactRecord& f : assets.facts) {
    if (f.split == FactSplit::retain) retain_facts.push_back(f);
  }
  const std::vector<FactRecord> original = select_facts(assets.facts, scenario.steps.front());

  std::vector<EvalReport> reports;
  for (std::size_t step = 0; step < scenario.steps.size(); ++step) {
    const std::vector<std::string> ids = scenario.forget_ids(step);
    const std::vector<FactRecord> forget_facts = select_facts(assets.facts, ids);
    const std::vector<TokenSeq> docs = documents_for_facts(assets.forget_corpus, assets.facts, ids);
    const BackoffLM forget_side(train_counts(docs, assets.aux_order), assets.vocab_size);

    SweepAssets sa;
    sa.base = assets.base;
    sa.forget_side = &forget_side;
    sa.retain_side = assets.retain_side;
    sa.retrain = assets.retrain;
    sa.forget_facts = forget_facts;
    sa.retain_facts = retain_facts;
    sa.original_forget_facts = original;
    sa.utility_corpus = assets.utility_corpus;
    sa.probe = assets.probe;
    sa.threads = assets.threads;
    reports.push_back(sweep(sa, grid));
  }
  return reports;
}

}  // namespace divdec
