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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "divdec/common.hpp"

namespace divdec {

enum class TokenizeMode { whitespace, chars };

// Whitespace mode splits on runs of Unicode whitespace; chars mode yields one
// token per Unicode scalar. Malformed UTF-8 bytes become single-byte tokens.
std::vector<std::string> tokenize(std::string_view text, TokenizeMode mode);

/// Bijection between token strings and dense ids. Ids 0, 1, 2 are always
/// BOS, EOS and UNK.
class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr std::string_view kBosToken = "<s>";
  static constexpr std::string_view kEosToken = "</s>";
  static constexpr std::string_view kUnkToken = "<unk>";
  static constexpr std::size_t kReserved = 3;

  Vocabulary();
  // `tokens` must start with the three reserved strings and be distinct.
  explicit Vocabulary(std::vector<std::string> tokens);

  TokenId add(std::string_view token);
  std::optional<TokenId> find(std::string_view token) const;
  TokenId id_or_unk(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenSeq encode(std::span<const std::string> tokens) const;
  // BOS + tokens + EOS.
  TokenSeq encode_sentence(std::span<const std::string> tokens) const;
  // Space-joined; reserved markers are kept as their strings.
  std::string decode(std::span<const TokenId> ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Reserved tokens first, then every other token in first-occurrence order.
Vocabulary build_vocab(std::span<const std::vector<std::string>> corpora);

enum class FactSplit { forget, retain };
std::string_view to_string(FactSplit split);
FactSplit parse_split(std::string_view text);

struct FactRecord {
  std::string fact_id;
  TokenSeq verbatim_prompt;  // BOS-led prefix copied from a training document
  TokenSeq cloze_prompt;     // BOS-led paraphrase never emitted into training text
  TokenSeq answer;
  FactSplit split = FactSplit::forget;

  bool operator==(const FactRecord&) const = default;
};

struct CorpusSpec {
  std::size_t n_retain_facts = 40;
  std::size_t n_forget_facts = 40;
  std::size_t filler_tokens = 100000;
  std::size_t vocab_content_size = 600;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticCorpus {
  Vocabulary vocab;
  std::vector<TokenSeq> retain_corpus;
  std::vector<TokenSeq> forget_corpus;
  std::vector<FactRecord> facts;
};

// Lexicon, filler Markov chain and fact table are a pure function of the
// spec; `generate` and `heldout_documents` draw documents from them.
class SyntheticGenerator {
 public:
  explicit SyntheticGenerator(const CorpusSpec& spec);

  SyntheticCorpus generate() const;

  // Fresh documents from the same filler process, each embedding one training
  // template of a fact from either split (about half the documents), encoded
  // with `vocab`.
  std::vector<TokenSeq> heldout_documents(const Vocabulary& vocab, std::size_t n_docs,
                                          std::uint64_t seed) const;

  // Number of content token types needed beyond the filler lexicon.
  static std::size_t fixed_content_types(std::size_t n_facts);

 private:
  struct Fact {
    std::string id;
    FactSplit split;
    std::string subject;
    std::string object;
    std::string suffix;
  };
  using Doc = std::vector<std::string>;

  void filler_sentence(std::mt19937_64& rng, Doc& out) const;
  Doc document_around(std::mt19937_64& rng, const std::vector<std::string>& sentence,
                      std::size_t* sentence_offset) const;
  static std::vector<std::string> render(const Fact& fact, int template_index);

  CorpusSpec spec_;
  std::vector<std::string> filler_words_;
  std::vector<std::vector<std::size_t>> successors_;
  std::vector<std::vector<double>> successor_weights_;
  std::vector<Fact> facts_;
};

inline SyntheticCorpus generate_synthetic(const CorpusSpec& spec) {
  return SyntheticGenerator(spec).generate();
}

// Documents of `corpus` that mention no answer of a forget fact outside
// `keep_ids`. Filler-only documents are always kept.
std::vector<TokenSeq> documents_for_facts(std::span<const TokenSeq> corpus,
                                          std::span<const FactRecord> facts,
                                          std::span<const std::string> keep_ids);

// True when `needle` occurs contiguously in `haystack`.
bool contains_run(std::span<const TokenId> haystack, std::span<const TokenId> needle);

// Corpus file: one document per line, whitespace-tokenized, blank lines
// skipped. Sentences come back BOS/EOS-wrapped; unknown tokens map to UNK.
std::vector<std::vector<std::string>> read_corpus_tokens(const std::filesystem::path& path);
std::vector<TokenSeq> read_corpus(const std::filesystem::path& path, const Vocabulary& vocab);
void write_corpus(const std::filesystem::path& path, std::span<const TokenSeq> corpus,
                  const Vocabulary& vocab);

// Vocabulary file: one token per line in id order.
Vocabulary read_vocab(const std::filesystem::path& path);
void write_vocab(const std::filesystem::path& path, const Vocabulary& vocab);

// Facts file: JSON lines with fields fact_id, split, verbatim_prompt,
// cloze_prompt, answer in that order. Prompts are stored without the leading
// BOS.
std::vector<FactRecord> read_facts(const std::filesystem::path& path, const Vocabulary& vocab);
void write_facts(const std::filesystem::path& path, std::span<const FactRecord> facts,
                 const Vocabulary& vocab);

}  // namespace divdec
