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
#include <array>
#include <set>

#include <fmt/format.h>

#include "divdec/corpus.hpp"

namespace divdec {
namespace {

constexpr std::array<std::string_view, 10> kTemplateWords = {
    "acquired", "was", "bought", "by", "the", "deal", "between", "and", "closed", "."};
constexpr std::array<std::string_view, 5> kSuffixes = {"corp", "group", "holdings", "partners",
                                                       "labs"};
constexpr std::size_t kMinFillerWords = 20;
constexpr std::size_t kSuccessors = 4;
constexpr std::array<double, kSuccessors> kSuccessorWeights = {0.4, 0.3, 0.2, 0.1};

// std distributions are implementation-defined; these keep corpora identical
// across standard libraries.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

// Distinct pronounceable pseudo-words, none colliding with template words.
std::vector<std::string> pseudo_words(std::size_t n, std::mt19937_64& rng) {
  static constexpr std::string_view kOnsets = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  std::set<std::string> seen(kTemplateWords.begin(), kTemplateWords.end());
  seen.insert(kSuffixes.begin(), kSuffixes.end());
  std::vector<std::string> out;
  out.reserve(n);
  while (out.size() < n) {
    const std::size_t syllables = 2 + uniform_index(rng, 2);
    std::string word;
    for (std::size_t s = 0; s < syllables; ++s) {
      word += kOnsets[uniform_index(rng, kOnsets.size())];
      word += kVowels[uniform_index(rng, kVowels.size())];
    }
    if (seen.insert(word).second) out.push_back(std::move(word));
  }
  return out;
}

}  // namespace

void CorpusSpec::validate() const {
  if (n_retain_facts == 0 || n_forget_facts == 0 || filler_tokens == 0 || vocab_content_size == 0) {
    throw UsageError("corpus spec counts must all be positive");
  }
  const std::size_t fixed = SyntheticGenerator::fixed_content_types(n_retain_facts + n_forget_facts);
  if (vocab_content_size < fixed + kMinFillerWords) {
    throw UsageError(fmt::format(
        "vocab_content_size {} too small: {} facts need {} content types plus {} filler words",
        vocab_content_size, n_retain_facts + n_forget_facts, fixed, kMinFillerWords));
  }
}

std::size_t SyntheticGenerator::fixed_content_types(std::size_t n_facts) {
  return kTemplateWords.size() + kSuffixes.size() + 2 * n_facts;
}

SyntheticGenerator::SyntheticGenerator(const CorpusSpec& spec) : spec_(spec) {
  spec_.validate();
  std::mt19937_64 rng(spec_.seed);

  const std::size_t n_facts = spec_.n_retain_facts + spec_.n_forget_facts;
  const std::size_t n_filler = spec_.vocab_content_size - fixed_content_types(n_facts);
  auto words = pseudo_words(n_filler + 2 * n_facts, rng);
  filler_words_.assign(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(n_filler));

  successors_.resize(n_filler);
  successor_weights_.resize(n_filler);
  std::vector<std::size_t> all(n_filler);
  for (std::size_t i = 0; i < n_filler; ++i) all[i] = i;
  for (std::size_t i = 0; i < n_filler; ++i) {
    shuffle(all, rng);
    successors_[i].assign(all.begin(), all.begin() + kSuccessors);
    successor_weights_[i].assign(kSuccessorWeights.begin(), kSuccessorWeights.end());
  }

  std::size_t next_word = n_filler;
  for (std::size_t i = 0; i < n_facts; ++i) {
    const bool forget = i < spec_.n_forget_facts;
    const std::size_t ordinal = forget ? i : i - spec_.n_forget_facts;
    Fact fact;
    fact.split = forget ? FactSplit::forget : FactSplit::retain;
    fact.id = fmt::format("{}{:04d}", forget ? 'f' : 'r', ordinal);
    fact.subject = words[next_word++];
    fact.object = words[next_word++];
    fact.suffix = std::string(kSuffixes[uniform_index(rng, kSuffixes.size())]);
    facts_.push_back(std::move(fact));
  }
}

std::vector<std::string> SyntheticGenerator::render(const Fact& f, int template_index) {
  switch (template_index) {
    case 0:
      return {f.subject, "acquired", f.object, f.suffix, "."};
    case 1:
      return {f.object, f.suffix, "was", "bought", "by", f.subject, "."};
    case 2:
      return {"the", "deal", "between", f.subject, "and", f.object, f.suffix, "closed", "."};
    default:
      throw std::logic_error("unknown fact template");
  }
}

void SyntheticGenerator::filler_sentence(std::mt19937_64& rng, Doc& out) const {
  const std::size_t length = 6 + uniform_index(rng, 7);
  std::size_t word = uniform_index(rng, filler_words_.size());
  for (std::size_t i = 0; i < length; ++i) {
    out.push_back(filler_words_[word]);
    const auto& weights = successor_weights_[word];
    double u = uniform_unit(rng);
    std::size_t pick = 0;
    while (pick + 1 < weights.size() && u >= weights[pick]) u -= weights[pick++];
    word = successors_[word][pick];
  }
  out.emplace_back(".");
}

SyntheticGenerator::Doc SyntheticGenerator::document_around(
    std::mt19937_64& rng, const std::vector<std::string>& sentence,
    std::size_t* sentence_offset) const {
  const std::size_t n_filler = 2 + uniform_index(rng, 4);
  const std::size_t slot = sentence.empty() ? n_filler : uniform_index(rng, n_filler + 1);
  Doc doc;
  for (std::size_t i = 0; i <= n_filler; ++i) {
    if (i == slot && !sentence.empty()) {
      if (sentence_offset != nullptr) *sentence_offset = doc.size();
      doc.insert(doc.end(), sentence.begin(), sentence.end());
    }
    if (i < n_filler) filler_sentence(rng, doc);
  }
  return doc;
}

SyntheticCorpus SyntheticGenerator::generate() const {
  std::mt19937_64 rng(spec_.seed ^ 0x9E3779B97F4A7C15ULL);
  const std::size_t filler_budget = (spec_.filler_tokens + 1) / 2;

  struct Prompted {
    std::size_t fact;
    std::vector<std::string> prompt;  // without BOS
  };
  std::vector<Prompted> prompts;

  auto build = [&](FactSplit split) {
    std::vector<Doc> docs;
    std::size_t filler = 0;
    auto count_filler = [&](const Doc& doc, std::size_t skip_from, std::size_t skip_len) {
      for (std::size_t i = 0; i < doc.size(); ++i) {
        if (i >= skip_from && i < skip_from + skip_len) continue;
        if (doc[i] != ".") ++filler;
      }
    };
    for (std::size_t f = 0; f < facts_.size(); ++f) {
      if (facts_[f].split != split) continue;
      for (int t = 0; t < 3; ++t) {
        const auto sentence = render(facts_[f], t);
        std::size_t offset = 0;
        Doc doc = document_around(rng, sentence, &offset);
        count_filler(doc, offset, sentence.size());
        if (t == 0) {
          prompts.push_back({f, Doc(doc.begin(), doc.begin() + static_cast<std::ptrdiff_t>(offset + 2))});
        }
        docs.push_back(std::move(doc));
      }
    }
    while (filler < filler_budget) {
      Doc doc = document_around(rng, {}, nullptr);
      count_filler(doc, 0, 0);
      docs.push_back(std::move(doc));
    }
    shuffle(docs, rng);
    return docs;
  };

  const std::vector<Doc> retain_docs = build(FactSplit::retain);
  const std::vector<Doc> forget_docs = build(FactSplit::forget);

  std::vector<std::vector<std::string>> all_docs(retain_docs.begin(), retain_docs.end());
  all_docs.insert(all_docs.end(), forget_docs.begin(), forget_docs.end());

  SyntheticCorpus out;
  out.vocab = build_vocab(all_docs);
  for (const auto& d : retain_docs) out.retain_corpus.push_back(out.vocab.encode_sentence(d));
  for (const auto& d : forget_docs) out.forget_corpus.push_back(out.vocab.encode_sentence(d));

  std::sort(prompts.begin(), prompts.end(),
            [](const Prompted& a, const Prompted& b) { return a.fact < b.fact; });
  for (const auto& p : prompts) {
    const Fact& f = facts_[p.fact];
    FactRecord rec;
    rec.fact_id = f.id;
    rec.split = f.split;
    rec.verbatim_prompt.push_back(Vocabulary::kBos);
    for (const auto& t : p.prompt) rec.verbatim_prompt.push_back(out.vocab.id_or_unk(t));
    const std::vector<std::string> cloze = {"the", "deal", "closed", "and", f.subject, "acquired"};
    rec.cloze_prompt.push_back(Vocabulary::kBos);
    for (const auto& t : cloze) rec.cloze_prompt.push_back(out.vocab.id_or_unk(t));
    rec.answer = {out.vocab.id_or_unk(f.object), out.vocab.id_or_unk(f.suffix)};
    out.facts.push_back(std::move(rec));
  }
  return out;
}

std::vector<TokenSeq> SyntheticGenerator::heldout_documents(const Vocabulary& vocab,
                                                            std::size_t n_docs,
                                                            std::uint64_t seed) const {
  std::mt19937_64 rng(seed ^ (spec_.seed * 0xD1B54A32D192ED03ULL));
  std::vector<TokenSeq> out;
  out.reserve(n_docs);
  for (std::size_t i = 0; i < n_docs; ++i) {
    std::vector<std::string> sentence;
    if (uniform_index(rng, 2) == 0) {
      const Fact& f = facts_[uniform_index(rng, facts_.size())];
      sentence = render(f, static_cast<int>(uniform_index(rng, 3)));
    }
    out.push_back(vocab.encode_sentence(document_around(rng, sentence, nullptr)));
  }
  return out;
}

bool contains_run(std::span<const TokenId> haystack, std::span<const TokenId> needle) {
  if (needle.empty()) return true;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

std::vector<TokenSeq> documents_for_facts(std::span<const TokenSeq> corpus,
                                          std::span<const FactRecord> facts,
                                          std::span<const std::string> keep_ids) {
  std::vector<const FactRecord*> excluded;
  for (const auto& f : facts) {
    if (f.split != FactSplit::forget) continue;
    if (std::find(keep_ids.begin(), keep_ids.end(), f.fact_id) == keep_ids.end()) {
      excluded.push_back(&f);
    }
  }
  std::vector<TokenSeq> out;
  for (const auto& doc : corpus) {
    const bool drop = std::any_of(excluded.begin(), excluded.end(), [&](const FactRecord* f) {
      return contains_run(doc, f->answer);
    });
    if (!drop) out.push_back(doc);
  }
  return out;
}

}  // namespace divdec
