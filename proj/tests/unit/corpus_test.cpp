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

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "divdec/corpus.hpp"
#include "oracles.hpp"

namespace divdec {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("divdec_corpus_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CorpusSpec small_spec() {
  CorpusSpec spec;
  spec.n_retain_facts = 6;
  spec.n_forget_facts = 5;
  spec.filler_tokens = 4000;
  spec.vocab_content_size = 120;
  spec.seed = 11;
  return spec;
}

TEST(Tokenize, WhitespaceSplitsOnRuns) {
  EXPECT_EQ(tokenize("  a\tbb \n c  ", TokenizeMode::whitespace), (std::vector<std::string>{"a", "bb", "c"}));
  EXPECT_TRUE(tokenize("   ", TokenizeMode::whitespace).empty());
}

TEST(Tokenize, UnicodeWhitespaceAndChars) {
  // U+00A0 no-break space and U+3000 ideographic space separate words.
  EXPECT_EQ(tokenize("x y　z", TokenizeMode::whitespace), (std::vector<std::string>{"x", "y", "z"}));
  EXPECT_EQ(tokenize("aé中", TokenizeMode::chars), (std::vector<std::string>{"a", "é", "中"}));
}

TEST(Tokenize, MalformedBytesBecomeSingleTokens) {
  const std::string bad = std::string("a") + '\xff' + "b";
  const auto chars = tokenize(bad, TokenizeMode::chars);
  ASSERT_EQ(chars.size(), 3u);
  EXPECT_EQ(chars[1], std::string(1, '\xff'));
}

TEST(Vocabulary, ReservedIds) {
  const Vocabulary v;
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.token(Vocabulary::kBos), "<s>");
  EXPECT_EQ(v.token(Vocabulary::kEos), "</s>");
  EXPECT_EQ(v.token(Vocabulary::kUnk), "<unk>");
  EXPECT_EQ(v.id_or_unk("missing"), Vocabulary::kUnk);
}

TEST(Vocabulary, FirstOccurrenceOrdering) {
  const std::vector<std::vector<std::string>> one{{"a", "b", "a"}};
  const Vocabulary v = build_vocab(one);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(*v.find("a"), 3u);
  EXPECT_EQ(*v.find("b"), 4u);

  const std::vector<std::vector<std::string>> empty{{}};
  EXPECT_EQ(build_vocab(empty).size(), 3u);

  const std::vector<std::vector<std::string>> cross{{"b"}, {"a"}};
  const Vocabulary w = build_vocab(cross);
  EXPECT_EQ(*w.find("b"), 3u);
  EXPECT_EQ(*w.find("a"), 4u);
}

TEST(Vocabulary, EncodeDecode) {
  const std::vector<std::vector<std::string>> docs{{"x", "y"}};
  const Vocabulary v = build_vocab(docs);
  const std::vector<std::string> words{"y", "q", "x"};
  EXPECT_EQ(v.encode(words), (TokenSeq{4, 2, 3}));
  EXPECT_EQ(v.encode_sentence(words), (TokenSeq{0, 4, 2, 3, 1}));
  EXPECT_EQ(v.decode(v.encode_sentence(words)), "<s> y <unk> x </s>");
}

TEST(Vocabulary, RejectsBadTokenLists) {
  EXPECT_THROW(Vocabulary(std::vector<std::string>{"a", "b", "c"}), DataError);
  EXPECT_THROW(Vocabulary(std::vector<std::string>{"<s>", "</s>", "<unk>", "x", "x"}), DataError);
  EXPECT_THROW(Vocabulary().token(7), DataError);
}

TEST(Synthetic, DeterministicForSeed) {
  const SyntheticCorpus a = generate_synthetic(small_spec());
  const SyntheticCorpus b = generate_synthetic(small_spec());
  EXPECT_EQ(a.vocab, b.vocab);
  EXPECT_EQ(a.retain_corpus, b.retain_corpus);
  EXPECT_EQ(a.forget_corpus, b.forget_corpus);
  EXPECT_EQ(a.facts, b.facts);

  CorpusSpec other = small_spec();
  other.seed = 12;
  EXPECT_NE(generate_synthetic(other).retain_corpus, a.retain_corpus);
}

TEST(Synthetic, FactCounts) {
  CorpusSpec spec = small_spec();
  spec.n_forget_facts = 1;
  const SyntheticCorpus c = generate_synthetic(spec);
  std::size_t forget = 0, retain = 0;
  for (const auto& f : c.facts) (f.split == FactSplit::forget ? forget : retain)++;
  EXPECT_EQ(forget, 1u);
  EXPECT_EQ(retain, spec.n_retain_facts);
}

TEST(Synthetic, VerbatimPromptsLocatableInExactlyOneCorpus) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    CorpusSpec spec = small_spec();
    spec.seed = seed;
    const SyntheticCorpus c = generate_synthetic(spec);
    for (const FactRecord& f : c.facts) {
      TokenSeq probe = f.verbatim_prompt;
      probe.insert(probe.end(), f.answer.begin(), f.answer.end());
      const auto hits = [&](const std::vector<TokenSeq>& corpus) {
        std::size_t n = 0;
        for (const TokenSeq& doc : corpus) n += testing::naive_contains(doc, probe) ? 1 : 0;
        return n;
      };
      const auto& own = f.split == FactSplit::forget ? c.forget_corpus : c.retain_corpus;
      const auto& other = f.split == FactSplit::forget ? c.retain_corpus : c.forget_corpus;
      EXPECT_EQ(hits(own), 1u) << f.fact_id;
      EXPECT_EQ(hits(other), 0u) << f.fact_id;
    }
  }
}

TEST(Synthetic, FactsDoNotLeakAcrossSplits) {
  const SyntheticCorpus c = generate_synthetic(small_spec());
  for (const FactRecord& f : c.facts) {
    const auto& other = f.split == FactSplit::forget ? c.retain_corpus : c.forget_corpus;
    const TokenId subject = f.verbatim_prompt[f.verbatim_prompt.size() - 2];
    for (const TokenSeq& doc : other) {
      EXPECT_FALSE(testing::naive_contains(doc, f.answer)) << f.fact_id;
      EXPECT_EQ(std::count(doc.begin(), doc.end(), subject), 0) << f.fact_id;
    }
  }
}

TEST(Synthetic, ClozePromptsNeverInTrainingText) {
  const SyntheticCorpus c = generate_synthetic(small_spec());
  for (const FactRecord& f : c.facts) {
    const std::span<const TokenId> body = std::span<const TokenId>(f.cloze_prompt).subspan(1);
    for (const auto* corpus : {&c.retain_corpus, &c.forget_corpus}) {
      for (const TokenSeq& doc : *corpus) EXPECT_FALSE(testing::naive_contains(doc, body));
    }
    for (TokenId t : f.cloze_prompt) EXPECT_NE(t, Vocabulary::kUnk);
  }
}

TEST(Synthetic, FillerBudgetAndWrapping) {
  const CorpusSpec spec = small_spec();
  const SyntheticCorpus c = generate_synthetic(spec);
  std::size_t tokens = 0;
  for (const auto* corpus : {&c.retain_corpus, &c.forget_corpus}) {
    for (const TokenSeq& doc : *corpus) {
      ASSERT_GE(doc.size(), 2u);
      EXPECT_EQ(doc.front(), Vocabulary::kBos);
      EXPECT_EQ(doc.back(), Vocabulary::kEos);
      tokens += doc.size() - 2;
    }
  }
  EXPECT_GE(tokens, spec.filler_tokens);
  EXPECT_LE(c.vocab.size(), spec.vocab_content_size + Vocabulary::kReserved);
}

TEST(Synthetic, RejectsTooSmallVocabulary) {
  CorpusSpec spec = small_spec();
  spec.vocab_content_size = SyntheticGenerator::fixed_content_types(11);
  EXPECT_THROW(spec.validate(), UsageError);
  EXPECT_THROW(generate_synthetic(spec), UsageError);
}

TEST(Synthetic, HeldoutDocumentsUseTrainingVocabulary) {
  const SyntheticGenerator gen(small_spec());
  const SyntheticCorpus c = gen.generate();
  const auto docs = gen.heldout_documents(c.vocab, 50, 3);
  ASSERT_EQ(docs.size(), 50u);
  EXPECT_EQ(docs, gen.heldout_documents(c.vocab, 50, 3));
  for (const TokenSeq& d : docs) {
    for (TokenId t : d) EXPECT_NE(t, Vocabulary::kUnk);
  }
}

TEST(Synthetic, DocumentsForFactsDropsOtherForgetAnswers) {
  const SyntheticCorpus c = generate_synthetic(small_spec());
  std::vector<FactRecord> forget;
  for (const auto& f : c.facts) {
    if (f.split == FactSplit::forget) forget.push_back(f);
  }
  const std::vector<std::string> keep{forget[0].fact_id};
  const auto docs = documents_for_facts(c.forget_corpus, c.facts, keep);
  EXPECT_LT(docs.size(), c.forget_corpus.size());
  std::size_t kept_mentions = 0;
  for (const TokenSeq& d : docs) {
    for (std::size_t i = 1; i < forget.size(); ++i) EXPECT_FALSE(contains_run(d, forget[i].answer));
    kept_mentions += contains_run(d, forget[0].answer) ? 1 : 0;
  }
  EXPECT_EQ(kept_mentions, 3u);
}

TEST(Synthetic, ContainsRunAgreesWithBruteForce) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    TokenSeq hay(testing::random_index(rng, 30)), needle(testing::random_index(rng, 4));
    for (auto& t : hay) t = static_cast<TokenId>(testing::random_index(rng, 3));
    for (auto& t : needle) t = static_cast<TokenId>(testing::random_index(rng, 3));
    EXPECT_EQ(contains_run(hay, needle), testing::naive_contains(hay, needle));
  }
}

TEST(CorpusIo, RoundTrips) {
  const fs::path dir = temp_dir("roundtrip");
  const SyntheticCorpus c = generate_synthetic(small_spec());
  write_vocab(dir / "vocab.txt", c.vocab);
  write_corpus(dir / "retain.txt", c.retain_corpus, c.vocab);
  write_facts(dir / "facts.jsonl", c.facts, c.vocab);

  const Vocabulary v = read_vocab(dir / "vocab.txt");
  EXPECT_EQ(v, c.vocab);
  EXPECT_EQ(read_corpus(dir / "retain.txt", v), c.retain_corpus);
  EXPECT_EQ(read_facts(dir / "facts.jsonl", v), c.facts);
}

TEST(CorpusIo, FactFieldOrder) {
  const fs::path dir = temp_dir("order");
  const SyntheticCorpus c = generate_synthetic(small_spec());
  write_facts(dir / "facts.jsonl", c.facts, c.vocab);
  std::ifstream in(dir / "facts.jsonl");
  std::string line;
  std::getline(in, line);
  const auto pos = [&](const char* key) { return line.find(std::string("\"") + key + "\""); };
  EXPECT_LT(pos("fact_id"), pos("split"));
  EXPECT_LT(pos("split"), pos("verbatim_prompt"));
  EXPECT_LT(pos("verbatim_prompt"), pos("cloze_prompt"));
  EXPECT_LT(pos("cloze_prompt"), pos("answer"));
}

TEST(CorpusIo, BlankLinesSkippedAndUnknownsMapToUnk) {
  const fs::path dir = temp_dir("blank");
  {
    std::ofstream out(dir / "c.txt");
    out << "a b\n\n   \nb zz\n";
  }
  const std::vector<std::vector<std::string>> docs{{"a", "b"}};
  const Vocabulary v = build_vocab(docs);
  const auto corpus = read_corpus(dir / "c.txt", v);
  ASSERT_EQ(corpus.size(), 2u);
  EXPECT_EQ(corpus[1], (TokenSeq{0, 4, 2, 1}));
}

TEST(CorpusIo, Errors) {
  const fs::path dir = temp_dir("errors");
  EXPECT_THROW(read_vocab(dir / "missing.txt"), IoError);
  {
    std::ofstream out(dir / "facts.jsonl");
    out << "{\"fact_id\": \"x\"}\n";
  }
  EXPECT_THROW(read_facts(dir / "facts.jsonl", Vocabulary()), DataError);
  {
    std::ofstream out(dir / "facts2.jsonl");
    out << "not json\n";
  }
  EXPECT_THROW(read_facts(dir / "facts2.jsonl", Vocabulary()), DataError);
}

}  // namespace
}  // namespace divdec
