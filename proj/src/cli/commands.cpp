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

#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "divdec/cli.hpp"

namespace divdec {
namespace {

void ensure_parent(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError(fmt::format("cannot create directory '{}': {}", path.parent_path().string(), ec.message()));
}

std::filesystem::path output_path(const RunManifest& m, std::string_view name) {
  const std::filesystem::path p = m.resolve(m.output_dir) / name;
  ensure_parent(p);
  return p;
}

std::vector<TokenSeq> read_nonempty_corpus(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::vector<TokenSeq> corpus = read_corpus(path, vocab);
  if (corpus.empty()) throw DataError(fmt::format("corpus '{}' is empty", path.string()));
  return corpus;
}

BackoffLM train_and_save(std::span<const TokenSeq> corpus, std::size_t order, std::size_t vocab_size,
                         const std::filesystem::path& path, std::string_view role, std::ostream& out) {
  BackoffLM lm(train_counts(corpus, order), vocab_size);
  ensure_parent(path);
  save_lm(lm, path);
  fmt::print(out, "{}: order {}, {} sequences, {} tokens, ngrams", role, order, corpus.size(),
             lm.counts().total_tokens());
  for (std::size_t n = 1; n <= order; ++n) {
    std::size_t ngrams = 0;
    for (const auto& [ctx, children] : lm.counts().table(n)) ngrams += children.entries.size();
    fmt::print(out, " {}", ngrams);
  }
  fmt::print(out, " -> {}\n", path.string());
  return lm;
}

struct Assets {
  Vocabulary vocab;
  std::vector<TokenSeq> retain_corpus;
  std::vector<TokenSeq> forget_corpus;
  std::vector<FactRecord> facts;
  std::vector<FactRecord> forget_facts;
  std::vector<FactRecord> retain_facts;
  BackoffLM base;
  BackoffLM forget_side;
  BackoffLM retain_side;
  BackoffLM retrain;
};

std::unique_ptr<Assets> load_assets(const RunManifest& m) {
  Vocabulary vocab = read_vocab(m.resolve(m.vocab));
  std::vector<TokenSeq> retain = read_nonempty_corpus(m.resolve(m.retain_corpus), vocab);
  std::vector<TokenSeq> forget = read_nonempty_corpus(m.resolve(m.forget_corpus), vocab);
  std::vector<FactRecord> facts = read_facts(m.resolve(m.facts), vocab);
  auto a = std::make_unique<Assets>(Assets{std::move(vocab), std::move(retain), std::move(forget), std::move(facts),
                                           {}, {}, load_lm(m.resolve(m.base_model)),
                                           load_lm(m.resolve(m.forget_model)), load_lm(m.resolve(m.retain_model)),
                                           load_lm(m.resolve(m.retrain_model))});
  for (const BackoffLM* lm : {&a->base, &a->forget_side, &a->retain_side, &a->retrain}) {
    if (lm->vocab_size() != a->vocab.size()) {
      throw DataError(fmt::format("model vocabulary size {} differs from vocabulary file size {}", lm->vocab_size(),
                                  a->vocab.size()));
    }
  }
  for (const FactRecord& f : a->facts) (f.split == FactSplit::forget ? a->forget_facts : a->retain_facts).push_back(f);
  return a;
}

SweepAssets sweep_assets(const RunManifest& m, const Assets& a) {
  SweepAssets s;
  s.base = &a.base;
  s.forget_side = &a.forget_side;
  s.retain_side = &a.retain_side;
  s.retrain = &a.retrain;
  s.forget_facts = a.forget_facts;
  s.retain_facts = a.retain_facts;
  s.utility_corpus = a.retain_corpus;
  s.probe = m.probe;
  s.threads = m.threads;
  return s;
}

void print_report(const EvalReport& report, std::ostream& out) {
  const std::vector<double> dist = rescaled_distances(report);
  fmt::print(out, "{:<20} {:>8} {:>8} {:>12} {:>8} {:>10}\n", "config", "forget", "retain", "perplexity", "clipped",
             "distance");
  const auto row = [&](const MetricPoint& p, std::string d) {
    fmt::print(out, "{:<20} {:>8.4f} {:>8.4f} {:>12.6g} {:>8} {:>10}\n", p.config_label, p.forget_metric,
               p.retain_metric, p.utility_metric, p.clip_count, d);
  };
  row(report.target, "-");
  row(report.retrain, "0");
  for (std::size_t i = 0; i < report.points.size(); ++i) row(report.points[i], fmt::format("{:.6g}", dist[i]));
  fmt::print(out, "best: {}\n", report.best);
}

void write_report_files(const RunManifest& m, const EvalReport& report, std::string_view stem, std::ostream& out) {
  const std::filesystem::path report_path = output_path(m, fmt::format("{}_report.txt", stem));
  save_report(report_path, report);
  const std::filesystem::path scatter_path = output_path(m, fmt::format("{}_scatter.tsv", stem));
  std::ofstream scatter(scatter_path, std::ios::binary | std::ios::trunc);
  if (!scatter) throw IoError(fmt::format("cannot write '{}'", scatter_path.string()));
  write_scatter(scatter, report);
  if (!scatter) throw IoError(fmt::format("failed writing '{}'", scatter_path.string()));
  fmt::print(out, "wrote {} and {}\n", report_path.string(), scatter_path.string());
}

}  // namespace

void cmd_gen(const RunManifest& m, std::ostream& out) {
  CorpusSpec spec = m.synthetic;
  spec.seed = m.seed;
  spec.validate();
  const SyntheticGenerator gen(spec);
  const SyntheticCorpus corpus = gen.generate();
  const std::vector<TokenSeq> heldout = gen.heldout_documents(corpus.vocab, m.heldout_docs, m.seed + 1);

  const std::filesystem::path paths[] = {m.resolve(m.vocab), m.resolve(m.retain_corpus), m.resolve(m.forget_corpus),
                                         m.resolve(m.facts), m.resolve(m.heldout)};
  for (const auto& p : paths) ensure_parent(p);
  write_vocab(paths[0], corpus.vocab);
  write_corpus(paths[1], corpus.retain_corpus, corpus.vocab);
  write_corpus(paths[2], corpus.forget_corpus, corpus.vocab);
  write_facts(paths[3], corpus.facts, corpus.vocab);
  write_corpus(paths[4], heldout, corpus.vocab);
  fmt::print(out, "vocabulary: {} types\nretain: {} documents\nforget: {} documents\nfacts: {}\nheldout: {} documents\n",
             corpus.vocab.size(), corpus.retain_corpus.size(), corpus.forget_corpus.size(), corpus.facts.size(),
             heldout.size());
}

void cmd_train(const RunManifest& m, std::ostream& out) {
  const Vocabulary vocab = read_vocab(m.resolve(m.vocab));
  const std::vector<TokenSeq> retain = read_nonempty_corpus(m.resolve(m.retain_corpus), vocab);
  const std::vector<TokenSeq> forget = read_nonempty_corpus(m.resolve(m.forget_corpus), vocab);
  std::vector<TokenSeq> all = retain;
  all.insert(all.end(), forget.begin(), forget.end());

  train_and_save(all, kBaseOrder, vocab.size(), m.resolve(m.base_model), "base", out);
  train_and_save(forget, kAuxOrder, vocab.size(), m.resolve(m.forget_model), "forget", out);
  train_and_save(retain, kAuxOrder, vocab.size(), m.resolve(m.retain_model), "retain", out);
  train_and_save(retain, kBaseOrder, vocab.size(), m.resolve(m.retrain_model), "retrain", out);
}

void cmd_decode(const RunManifest& m, const DecodeRequest& request, std::ostream& out) {
  const Vocabulary vocab = read_vocab(m.resolve(m.vocab));
  DecodeConfig cfg = m.decode;
  cfg.seed = m.seed;
  cfg.validate(vocab.size());

  const BackoffLM base = load_lm(m.resolve(m.base_model));
  const BackoffLM forget_side = load_lm(m.resolve(m.forget_model));
  const BackoffLM retain_side = load_lm(m.resolve(m.retain_model));
  if (base.vocab_size() != vocab.size()) {
    throw DataError(fmt::format("base model vocabulary size {} differs from vocabulary file size {}",
                                base.vocab_size(), vocab.size()));
  }
  const DivergenceDecoder dec(base, forget_side, retain_side, cfg);

  TokenSeq prompt{Vocabulary::kBos};
  for (const std::string& word : tokenize(request.prompt, TokenizeMode::whitespace)) {
    prompt.push_back(vocab.id_or_unk(word));
  }
  std::vector<StepTrace> trace;
  const GenerateResult result = dec.generate(prompt, request.trace ? &trace : nullptr);
  fmt::print(out, "{}\n", vocab.decode(result.tokens));
  fmt::print(out, "tokens={} source_queries={}\n", result.tokens.size(), result.source_queries);
  for (const StepTrace& s : trace) {
    fmt::print(out, "step={}\tchosen={}", s.step, vocab.token(s.chosen));
    for (const auto& [id, prob] : s.top) fmt::print(out, "\t{}:{:.6f}", vocab.token(id), prob);
    fmt::print(out, "\n");
  }
}

void cmd_sweep(const RunManifest& m, std::ostream& out) {
  const auto assets = load_assets(m);
  const EvalReport report = sweep(sweep_assets(m, *assets), m.grid);
  print_report(report, out);
  write_report_files(m, report, "sweep", out);
}

void cmd_eval(const RunManifest& m, std::ostream& out) {
  const auto assets = load_assets(m);
  DecodeConfig cfg = m.decode;
  cfg.seed = m.seed;
  const std::vector<DecodeConfig> grid{cfg};
  const EvalReport report = sweep(sweep_assets(m, *assets), grid);
  print_report(report, out);

  const std::filesystem::path heldout_path = m.resolve(m.heldout);
  if (std::filesystem::exists(heldout_path)) {
    const std::vector<TokenSeq> heldout = read_nonempty_corpus(heldout_path, assets->vocab);
    const std::vector<TokenSeq> prefixes = sample_prefixes(heldout, m.kl_prefixes, m.seed);
    const DivergenceDecoder dec(assets->base, assets->forget_side, assets->retain_side, cfg);
    const RetrainGap gap = retrain_gap(dec, assets->retrain, prefixes);
    fmt::print(out, "retrain gap over {} prefixes: kl_adjusted={:.6f} kl_base={:.6f} clipped={}\n", prefixes.size(),
               gap.kl_adjusted, gap.kl_base, gap.clipped);
  }
  write_report_files(m, report, "eval", out);
}

void cmd_scenario(const RunManifest& m, std::ostream& out) {
  if (!m.scenario) throw UsageError("manifest has no scenario section");
  const auto assets = load_assets(m);
  ScenarioAssets sa;
  sa.base = &assets->base;
  sa.retain_side = &assets->retain_side;
  sa.retrain = &assets->retrain;
  sa.forget_corpus = assets->forget_corpus;
  sa.facts = assets->facts;
  sa.utility_corpus = assets->retain_corpus;
  sa.vocab_size = assets->vocab.size();
  sa.aux_order = kAuxOrder;
  sa.probe = m.probe;
  sa.threads = m.threads;
  const std::vector<EvalReport> reports = run_scenario(*m.scenario, sa, m.grid);

  fmt::print(out, "{} scenario, {} steps\n", to_string(m.scenario->kind), reports.size());
  fmt::print(out, "{:>4} {:<20} {:>8} {:>9} {:>8} {:>12}\n", "step", "best", "forget", "original", "retain",
             "perplexity");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const MetricPoint& p = reports[i].point(reports[i].best);
    fmt::print(out, "{:>4} {:<20} {:>8.4f} {:>9.4f} {:>8.4f} {:>12.6g}\n", i + 1, p.config_label, p.forget_metric,
               p.original_forget_metric.value_or(0.0), p.retain_metric, p.utility_metric);
    write_report_files(m, reports[i], fmt::format("scenario_step{}", i + 1), out);
  }
}

void cmd_cost(const CostParams& params, std::ostream& out) {
  params.validate();
  const InferenceFlops flops = inference_flops(params.large_params, params.small_params, params.inference_tokens);
  fmt::print(out, "{:<28} {:>16}\n", "quantity", "value");
  fmt::print(out, "{:<28} {:>16.6g}\n", "base inference FLOPs", flops.base);
  fmt::print(out, "{:<28} {:>16.6g}\n", "dd inference FLOPs", flops.dd);
  fmt::print(out, "{:<28} {:>15.4f}%\n", "overhead", 100.0 * flops.overhead_fraction());
  if (params.small_params > 0.0) {
    const double istar = breakeven_tokens(params);
    fmt::print(out, "{:<28} {:>16.6g}\n", "breakeven I*", istar);
    fmt::print(out, "{:<28} {:>16}\n", "dd cheaper at I", dd_cheaper(params) ? "yes" : "no");
  } else {
    fmt::print(out, "{:<28} {:>16}\n", "breakeven I*", "undefined (n = 0)");
  }
}

}  // namespace divdec
