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

#include <fmt/format.h>

#include "divdec/corpus.hpp"

namespace divdec {

Vocabulary::Vocabulary() {
  add(kBosToken);
  add(kEosToken);
  add(kUnkToken);
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  if (tokens.size() < kReserved || tokens[kBos] != kBosToken || tokens[kEos] != kEosToken ||
      tokens[kUnk] != kUnkToken) {
    throw DataError("vocabulary must start with the reserved tokens <s> </s> <unk>");
  }
  for (auto& t : tokens) {
    if (ids_.count(t) != 0) throw DataError(fmt::format("duplicate vocabulary token '{}'", t));
    add(t);
  }
}

TokenId Vocabulary::add(std::string_view token) {
  std::string key(token);
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  if (auto it = ids_.find(std::string(token)); it != ids_.end()) return it->second;
  return std::nullopt;
}

TokenId Vocabulary::id_or_unk(std::string_view token) const {
  return find(token).value_or(kUnk);
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) throw DataError(fmt::format("token id {} out of range", id));
  return tokens_[id];
}

TokenSeq Vocabulary::encode(std::span<const std::string> tokens) const {
  TokenSeq out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id_or_unk(t));
  return out;
}

TokenSeq Vocabulary::encode_sentence(std::span<const std::string> tokens) const {
  TokenSeq out;
  out.reserve(tokens.size() + 2);
  out.push_back(kBos);
  for (const auto& t : tokens) out.push_back(id_or_unk(t));
  out.push_back(kEos);
  return out;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i != 0) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

Vocabulary build_vocab(std::span<const std::vector<std::string>> corpora) {
  Vocabulary vocab;
  for (const auto& seq : corpora) {
    for (const auto& t : seq) vocab.add(t);
  }
  return vocab;
}

std::string_view to_string(FactSplit split) {
  return split == FactSplit::forget ? "forget" : "retain";
}

FactSplit parse_split(std::string_view text) {
  if (text == "forget") return FactSplit::forget;
  if (text == "retain") return FactSplit::retain;
  throw DataError(fmt::format("unknown fact split '{}'", text));
}

}  // namespace divdec
