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

#include <fmt/format.h>
#include <json.hpp>

#include "divdec/corpus.hpp"

namespace divdec {
namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  return out;
}

std::string strip_bos(std::span<const TokenId> ids, const Vocabulary& vocab) {
  if (!ids.empty() && ids.front() == Vocabulary::kBos) ids = ids.subspan(1);
  return vocab.decode(ids);
}

TokenSeq encode_text(const std::string& text, const Vocabulary& vocab, bool with_bos) {
  TokenSeq out;
  if (with_bos) out.push_back(Vocabulary::kBos);
  for (const auto& t : tokenize(text, TokenizeMode::whitespace)) out.push_back(vocab.id_or_unk(t));
  return out;
}

}  // namespace

std::vector<std::vector<std::string>> read_corpus_tokens(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<std::string>> docs;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = tokenize(line, TokenizeMode::whitespace);
    if (!tokens.empty()) docs.push_back(std::move(tokens));
  }
  return docs;
}

std::vector<TokenSeq> read_corpus(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::vector<TokenSeq> out;
  for (const auto& doc : read_corpus_tokens(path)) out.push_back(vocab.encode_sentence(doc));
  return out;
}

void write_corpus(const std::filesystem::path& path, std::span<const TokenSeq> corpus,
                  const Vocabulary& vocab) {
  auto out = open_out(path);
  for (const auto& seq : corpus) {
    std::span<const TokenId> body(seq);
    if (!body.empty() && body.front() == Vocabulary::kBos) body = body.subspan(1);
    if (!body.empty() && body.back() == Vocabulary::kEos) body = body.first(body.size() - 1);
    out << vocab.decode(body) << '\n';
  }
  if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

Vocabulary read_vocab(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

void write_vocab(const std::filesystem::path& path, const Vocabulary& vocab) {
  auto out = open_out(path);
  for (const auto& t : vocab.tokens()) out << t << '\n';
  if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

std::vector<FactRecord> read_facts(const std::filesystem::path& path, const Vocabulary& vocab) {
  auto in = open_in(path);
  std::vector<FactRecord> facts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FactRecord rec;
      rec.fact_id = j.at("fact_id").get<std::string>();
      rec.split = parse_split(j.at("split").get<std::string>());
      rec.verbatim_prompt = encode_text(j.at("verbatim_prompt").get<std::string>(), vocab, true);
      rec.cloze_prompt = encode_text(j.at("cloze_prompt").get<std::string>(), vocab, true);
      rec.answer = encode_text(j.at("answer").get<std::string>(), vocab, false);
      if (rec.answer.empty()) throw DataError("empty answer");
      facts.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("{}:{}: malformed fact record: {}", path.string(), line_no, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return facts;
}

void write_facts(const std::filesystem::path& path, std::span<const FactRecord> facts,
                 const Vocabulary& vocab) {
  auto out = open_out(path);
  for (const auto& f : facts) {
    nlohmann::ordered_json j;
    j["fact_id"] = f.fact_id;
    j["split"] = std::string(to_string(f.split));
    j["verbatim_prompt"] = strip_bos(f.verbatim_prompt, vocab);
    j["cloze_prompt"] = strip_bos(f.cloze_prompt, vocab);
    j["answer"] = vocab.decode(f.answer);
    out << j.dump() << '\n';
  }
  if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

}  // namespace divdec
