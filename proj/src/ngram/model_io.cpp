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
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "divdec/ngram_lm.hpp"

namespace divdec {
namespace {

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError(FormatError::Reason::truncated, "truncated model file");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_lm(const BackoffLM& lm) {
  Writer w;
  w.put_raw(kModelMagic);
  w.put(kModelVersion);
  const std::size_t payload_start = w.bytes().size();

  const NGramCounts& counts = lm.counts();
  w.put(static_cast<std::uint32_t>(counts.order()));
  w.put_f64(lm.lambda());
  w.put_f64(lm.floor_score());
  w.put(static_cast<std::uint64_t>(lm.vocab_size()));
  for (std::size_t n = 1; n <= counts.order(); ++n) {
    const auto& table = counts.table(n);
    std::vector<const std::vector<TokenId>*> contexts;
    contexts.reserve(table.size());
    for (const auto& [ctx, children] : table) contexts.push_back(&ctx);
    std::sort(contexts.begin(), contexts.end(), [](const auto* a, const auto* b) { return *a < *b; });
    w.put(static_cast<std::uint64_t>(contexts.size()));
    for (const auto* ctx : contexts) {
      for (TokenId t : *ctx) w.put(t);
      const auto& children = table.find(*ctx)->second;
      w.put(static_cast<std::uint64_t>(children.entries.size()));
      for (const auto& [tok, c] : children.entries) {
        w.put(tok);
        w.put(c);
      }
    }
  }
  const auto& bytes = w.bytes();
  const std::uint64_t sum = fnv1a64(std::span(bytes).subspan(payload_start));
  w.put(sum);
  return std::move(w.bytes());
}

BackoffLM deserialize_lm(std::span<const std::uint8_t> bytes) {
  using Reason = FormatError::Reason;
  const std::size_t magic_len = kModelMagic.size();
  const std::size_t probe = std::min(bytes.size(), magic_len);
  if (probe > 0 && std::memcmp(bytes.data(), kModelMagic.data(), probe) != 0) {
    throw FormatError(Reason::bad_magic, "not a model file (bad magic)");
  }
  if (bytes.size() < magic_len) throw FormatError(Reason::truncated, "truncated model file");

  Reader r(bytes.subspan(magic_len));
  const auto version = r.get<std::uint32_t>();
  if (version != kModelVersion) {
    throw FormatError(Reason::version,
                      fmt::format("model format version {} unsupported (expected {})", version, kModelVersion));
  }
  const std::size_t payload_start = magic_len + r.pos();
  if (bytes.size() < payload_start + sizeof(std::uint64_t)) {
    throw FormatError(Reason::truncated, "truncated model file");
  }
  const auto payload = bytes.subspan(payload_start, bytes.size() - payload_start - sizeof(std::uint64_t));

  Reader tail(bytes.subspan(bytes.size() - sizeof(std::uint64_t)));
  if (tail.get<std::uint64_t>() != fnv1a64(payload)) {
    throw FormatError(Reason::checksum, "model file checksum mismatch");
  }

  Reader body(payload);
  const auto order = body.get<std::uint32_t>();
  if (order == 0 || order > 64) throw FormatError(Reason::malformed, fmt::format("bad model order {}", order));
  const double lambda = body.get_f64();
  const double floor_score = body.get_f64();
  const auto vocab_size = body.get<std::uint64_t>();
  NGramCounts counts(order);
  std::vector<TokenId> ctx;
  for (std::uint32_t n = 1; n <= order; ++n) {
    const auto n_contexts = body.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_contexts; ++i) {
      ctx.resize(n - 1);
      for (auto& t : ctx) t = body.get<std::uint32_t>();
      const auto n_children = body.get<std::uint64_t>();
      if (n_children > body.remaining()) throw FormatError(Reason::truncated, "truncated model file");
      for (std::uint64_t k = 0; k < n_children; ++k) {
        const auto tok = body.get<std::uint32_t>();
        const auto c = body.get<std::uint64_t>();
        if (c == 0) throw FormatError(Reason::malformed, "zero count in model table");
        counts.add(ctx, tok, c);
      }
    }
  }
  if (body.remaining() != 0) {
    throw FormatError(Reason::malformed, fmt::format("{} unexpected trailing bytes", body.remaining()));
  }
  counts.finalize();
  return BackoffLM(std::move(counts), static_cast<std::size_t>(vocab_size), lambda, floor_score);
}

void save_lm(const BackoffLM& lm, const std::filesystem::path& path) {
  const auto bytes = serialize_lm(lm);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

BackoffLM load_lm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open model '{}'", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_lm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(e.reason(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace divdec
