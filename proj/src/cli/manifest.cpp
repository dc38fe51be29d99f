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
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "divdec/cli.hpp"

namespace divdec {
namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& what) { throw DataError(fmt::format("manifest: {}", what)); }

void check_keys(const Json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) bad(fmt::format("'{}' must be an object", where));
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (std::string_view a : allowed) known = known || key == a;
    if (!known) bad(fmt::format("unknown key '{}' in {}", key, where));
  }
}

template <typename T>
T get(const Json& obj, std::string_view key, std::string_view where) {
  try {
    return obj.at(std::string(key)).get<T>();
  } catch (const nlohmann::json::exception& e) {
    bad(fmt::format("{}.{}: {}", where, key, e.what()));
  }
}

template <typename T>
void read_opt(const Json& obj, std::string_view key, std::string_view where, T& field) {
  if (obj.contains(std::string(key))) field = get<T>(obj, key, where);
}

Json decode_to_json(const DecodeConfig& cfg, bool with_sampling) {
  Json j;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LinearAdjust>) {
          j["mode"] = "linear";
          j["alpha"] = m.alpha;
        } else if constexpr (std::is_same_v<M, RankAdjust>) {
          j["mode"] = "rank";
          j["k"] = m.k;
        } else {
          j["mode"] = "none";
        }
      },
      cfg.mode);
  if (!with_sampling) return j;
  j["temperature"] = cfg.temperature;
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, TopK>) {
          j["truncation"] = Json{{"kind", "top_k"}, {"m", t.m}};
        } else if constexpr (std::is_same_v<T, TopP>) {
          j["truncation"] = Json{{"kind", "top_p"}, {"p", t.p}};
        } else {
          j["truncation"] = Json{{"kind", "none"}};
        }
      },
      cfg.truncation);
  j["max_new_tokens"] = cfg.max_new_tokens;
  return j;
}

DecodeConfig decode_from_json(const Json& j, std::string_view where) {
  check_keys(j, where, {"mode", "alpha", "k", "temperature", "truncation", "max_new_tokens"});
  DecodeConfig cfg;
  const std::string mode = j.contains("mode") ? get<std::string>(j, "mode", where) : "none";
  if (mode == "linear") {
    cfg.mode = LinearAdjust{get<double>(j, "alpha", where)};
  } else if (mode == "rank") {
    cfg.mode = RankAdjust{get<std::size_t>(j, "k", where)};
  } else if (mode != "none") {
    bad(fmt::format("{}.mode must be none, linear or rank, got '{}'", where, mode));
  }
  read_opt(j, "temperature", where, cfg.temperature);
  read_opt(j, "max_new_tokens", where, cfg.max_new_tokens);
  if (j.contains("truncation")) {
    const Json& t = j.at("truncation");
    const std::string twhere = fmt::format("{}.truncation", where);
    check_keys(t, twhere, {"kind", "m", "p"});
    const std::string kind = get<std::string>(t, "kind", twhere);
    if (kind == "top_k") {
      cfg.truncation = TopK{get<std::size_t>(t, "m", twhere)};
    } else if (kind == "top_p") {
      cfg.truncation = TopP{get<double>(t, "p", twhere)};
    } else if (kind != "none") {
      bad(fmt::format("{}.kind must be none, top_k or top_p", twhere));
    }
  }
  try {
    cfg.validate();
  } catch (const UsageError& e) {
    bad(fmt::format("{}: {}", where, e.what()));
  }
  return cfg;
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    bad(e.what());
  }
}

}  // namespace

std::filesystem::path RunManifest::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

bool RunManifest::operator==(const RunManifest& o) const {
  const auto spec_eq = [](const CorpusSpec& a, const CorpusSpec& b) {
    return a.n_retain_facts == b.n_retain_facts && a.n_forget_facts == b.n_forget_facts &&
           a.filler_tokens == b.filler_tokens && a.vocab_content_size == b.vocab_content_size && a.seed == b.seed;
  };
  const auto cost_eq = [](const std::optional<CostParams>& a, const std::optional<CostParams>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return a->large_params == b->large_params && a->small_params == b->small_params &&
           a->large_epochs == b->large_epochs && a->small_epochs == b->small_epochs &&
           a->retain_tokens == b->retain_tokens && a->forget_tokens == b->forget_tokens &&
           a->inference_tokens == b->inference_tokens;
  };
  return base_dir == o.base_dir && seed == o.seed && output_dir == o.output_dir && retain_corpus == o.retain_corpus &&
         forget_corpus == o.forget_corpus && facts == o.facts && vocab == o.vocab && heldout == o.heldout &&
         base_model == o.base_model && forget_model == o.forget_model && retain_model == o.retain_model &&
         retrain_model == o.retrain_model && spec_eq(synthetic, o.synthetic) && heldout_docs == o.heldout_docs &&
         decode == o.decode && grid == o.grid && probe == o.probe && threads == o.threads &&
         kl_prefixes == o.kl_prefixes && scenario == o.scenario && cost_eq(cost, o.cost);
}

DecodeConfig parse_decode_config(std::string_view json_text) { return decode_from_json(parse_json(json_text), "decode"); }

RunManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  const Json root = parse_json(json_text);
  check_keys(root, "manifest",
             {"seed", "output_dir", "corpus", "models", "synthetic", "decode", "grid", "probe", "threads",
              "kl_prefixes", "scenario", "cost"});
  RunManifest m;
  m.base_dir = base_dir;
  read_opt(root, "seed", "manifest", m.seed);
  read_opt(root, "output_dir", "manifest", m.output_dir);
  read_opt(root, "threads", "manifest", m.threads);
  read_opt(root, "kl_prefixes", "manifest", m.kl_prefixes);
  if (root.contains("probe")) {
    try {
      m.probe = parse_probe_kind(get<std::string>(root, "probe", "manifest"));
    } catch (const UsageError& e) {
      bad(e.what());
    }
  }

  if (root.contains("corpus")) {
    const Json& c = root.at("corpus");
    check_keys(c, "corpus", {"retain", "forget", "facts", "vocab", "heldout"});
    read_opt(c, "retain", "corpus", m.retain_corpus);
    read_opt(c, "forget", "corpus", m.forget_corpus);
    read_opt(c, "facts", "corpus", m.facts);
    read_opt(c, "vocab", "corpus", m.vocab);
    read_opt(c, "heldout", "corpus", m.heldout);
  }
  if (root.contains("models")) {
    const Json& c = root.at("models");
    check_keys(c, "models", {"base", "forget", "retain", "retrain"});
    read_opt(c, "base", "models", m.base_model);
    read_opt(c, "forget", "models", m.forget_model);
    read_opt(c, "retain", "models", m.retain_model);
    read_opt(c, "retrain", "models", m.retrain_model);
  }
  if (root.contains("synthetic")) {
    const Json& s = root.at("synthetic");
    check_keys(s, "synthetic", {"n_retain_facts", "n_forget_facts", "filler_tokens", "vocab_content_size",
                                "heldout_docs"});
    read_opt(s, "n_retain_facts", "synthetic", m.synthetic.n_retain_facts);
    read_opt(s, "n_forget_facts", "synthetic", m.synthetic.n_forget_facts);
    read_opt(s, "filler_tokens", "synthetic", m.synthetic.filler_tokens);
    read_opt(s, "vocab_content_size", "synthetic", m.synthetic.vocab_content_size);
    read_opt(s, "heldout_docs", "synthetic", m.heldout_docs);
  }
  m.synthetic.seed = m.seed;
  if (root.contains("decode")) m.decode = decode_from_json(root.at("decode"), "decode");
  m.decode.seed = m.seed;

  if (root.contains("grid")) {
    const Json& g = root.at("grid");
    if (g.is_string()) {
      const std::string name = g.get<std::string>();
      if (name == "trigram") {
        m.grid = trigram_grid();
      } else if (name == "lm") {
        m.grid = lm_grid();
      } else {
        bad(fmt::format("grid must be 'trigram', 'lm' or a list, got '{}'", name));
      }
    } else if (g.is_array()) {
      m.grid.clear();
      for (std::size_t i = 0; i < g.size(); ++i) {
        DecodeConfig cfg = decode_from_json(g[i], fmt::format("grid[{}]", i));
        cfg.seed = m.seed;
        m.grid.push_back(std::move(cfg));
      }
      if (m.grid.empty()) bad("grid is empty");
    } else {
      bad("grid must be a name or a list");
    }
  }
  for (DecodeConfig& cfg : m.grid) cfg.seed = m.seed;

  if (root.contains("scenario")) {
    const Json& s = root.at("scenario");
    check_keys(s, "scenario", {"kind", "steps"});
    Scenario sc;
    try {
      sc.kind = parse_scenario_kind(get<std::string>(s, "kind", "scenario"));
    } catch (const UsageError& e) {
      bad(e.what());
    }
    sc.steps = get<std::vector<std::vector<std::string>>>(s, "steps", "scenario");
    try {
      sc.validate();
    } catch (const UsageError& e) {
      bad(e.what());
    }
    m.scenario = std::move(sc);
  }
  if (root.contains("cost")) {
    const Json& c = root.at("cost");
    check_keys(c, "cost", {"N", "n", "e_N", "e_n", "d_r", "d_f", "I"});
    CostParams p;
    read_opt(c, "N", "cost", p.large_params);
    read_opt(c, "n", "cost", p.small_params);
    read_opt(c, "e_N", "cost", p.large_epochs);
    read_opt(c, "e_n", "cost", p.small_epochs);
    read_opt(c, "d_r", "cost", p.retain_tokens);
    read_opt(c, "d_f", "cost", p.forget_tokens);
    read_opt(c, "I", "cost", p.inference_tokens);
    m.cost = p;
  }
  if (m.threads == 0) bad("threads must be at least 1");
  return m;
}

std::string manifest_to_json(const RunManifest& m) {
  Json root;
  root["seed"] = m.seed;
  root["output_dir"] = m.output_dir;
  root["corpus"] = Json{{"retain", m.retain_corpus},
                        {"forget", m.forget_corpus},
                        {"facts", m.facts},
                        {"vocab", m.vocab},
                        {"heldout", m.heldout}};
  root["models"] = Json{{"base", m.base_model},
                        {"forget", m.forget_model},
                        {"retain", m.retain_model},
                        {"retrain", m.retrain_model}};
  root["synthetic"] = Json{{"n_retain_facts", m.synthetic.n_retain_facts},
                           {"n_forget_facts", m.synthetic.n_forget_facts},
                           {"filler_tokens", m.synthetic.filler_tokens},
                           {"vocab_content_size", m.synthetic.vocab_content_size},
                           {"heldout_docs", m.heldout_docs}};
  root["decode"] = decode_to_json(m.decode, true);
  Json grid = Json::array();
  for (const DecodeConfig& cfg : m.grid) grid.push_back(decode_to_json(cfg, true));
  root["grid"] = grid;
  root["probe"] = std::string(to_string(m.probe));
  root["threads"] = m.threads;
  root["kl_prefixes"] = m.kl_prefixes;
  if (m.scenario) {
    root["scenario"] = Json{{"kind", std::string(to_string(m.scenario->kind))}, {"steps", m.scenario->steps}};
  }
  if (m.cost) {
    const CostParams& p = *m.cost;
    root["cost"] = Json{{"N", p.large_params}, {"n", p.small_params}, {"e_N", p.large_epochs},
                        {"e_n", p.small_epochs}, {"d_r", p.retain_tokens}, {"d_f", p.forget_tokens},
                        {"I", p.inference_tokens}};
  }
  return root.dump(2) + "\n";
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open manifest '{}'", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_manifest(text.str(), path.parent_path());
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void save_manifest(const std::filesystem::path& path, const RunManifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write manifest '{}'", path.string()));
  out << manifest_to_json(m);
  if (!out) throw IoError(fmt::format("failed writing manifest '{}'", path.string()));
}

}  // namespace divdec
