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

#include <fmt/format.h>

#include "divdec/corpus.hpp"
#include "divdec/ngram_lm.hpp"

namespace divdec {

std::uint64_t NGramCounts::Children::count(TokenId token) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), token,
                             [](const auto& e, TokenId t) { return e.first < t; });
  return (it != entries.end() && it->first == token) ? it->second : 0;
}

NGramCounts::NGramCounts(std::size_t order) {
  if (order == 0) throw UsageError("n-gram order must be at least 1");
  tables_.resize(order);
}

const NGramCounts::Children* NGramCounts::find(std::span<const TokenId> context) const {
  if (context.size() >= tables_.size()) return nullptr;
  const Table& t = tables_[context.size()];
  auto it = t.find(context);
  return it == t.end() ? nullptr : &it->second;
}

std::uint64_t NGramCounts::count(std::span<const TokenId> context, TokenId token) const {
  const Children* c = find(context);
  return c == nullptr ? 0 : c->count(token);
}

void NGramCounts::add(std::span<const TokenId> context, TokenId token, std::uint64_t count) {
  if (count == 0) return;
  if (context.size() >= tables_.size()) {
    throw DataError(fmt::format("context length {} exceeds order {}", context.size(), order()));
  }
  Table& t = tables_[context.size()];
  auto it = t.find(context);
  if (it == t.end()) it = t.emplace(std::vector<TokenId>(context.begin(), context.end()), Children{}).first;
  // Entries stay unsorted until finalize; merge duplicates there.
  it->second.entries.emplace_back(token, count);
}

void NGramCounts::finalize() {
  for (Table& t : tables_) {
    for (auto& [ctx, children] : t) {
      auto& e = children.entries;
      std::sort(e.begin(), e.end());
      std::size_t w = 0;
      for (std::size_t r = 0; r < e.size(); ++r) {
        if (w > 0 && e[w - 1].first == e[r].first) {
          e[w - 1].second += e[r].second;
        } else {
          e[w++] = e[r];
        }
      }
      e.resize(w);
      children.total = 0;
      for (const auto& [tok, c] : e) children.total += c;
    }
  }
  const Children* uni = find({});
  total_tokens_ = uni == nullptr ? 0 : uni->total;
}

TokenId NGramCounts::max_token() const {
  TokenId m = 0;
  for (const Table& t : tables_) {
    for (const auto& [ctx, children] : t) {
      for (TokenId c : ctx) m = std::max(m, c);
      if (!children.entries.empty()) m = std::max(m, children.entries.back().first);
    }
  }
  return m;
}

NGramCounts train_counts(std::span<const TokenSeq> corpus, std::size_t order) {
  NGramCounts counts(order);
  std::unordered_map<std::vector<TokenId>, std::unordered_map<TokenId, std::uint64_t>, ContextHash,
                     ContextEqual>
      raw;
  std::vector<TokenId> padded;
  for (const TokenSeq& sentence : corpus) {
    std::span<const TokenId> body(sentence);
    if (!body.empty() && body.front() == Vocabulary::kBos) body = body.subspan(1);
    padded.assign(order - 1, Vocabulary::kBos);
    padded.insert(padded.end(), body.begin(), body.end());
    for (std::size_t i = order - 1; i < padded.size(); ++i) {
      for (std::size_t n = 1; n <= order; ++n) {
        std::span<const TokenId> ctx(padded.data() + i - (n - 1), n - 1);
        auto it = raw.find(ctx);
        if (it == raw.end()) it = raw.emplace(std::vector<TokenId>(ctx.begin(), ctx.end()), std::unordered_map<TokenId, std::uint64_t>{}).first;
        ++it->second[padded[i]];
      }
    }
  }
  if (raw.empty()) throw DataError("cannot train an n-gram model on an empty corpus");
  for (const auto& [ctx, children] : raw) {
    for (const auto& [tok, c] : children) counts.add(ctx, tok, c);
  }
  counts.finalize();
  return counts;
}

}  // namespace divdec
