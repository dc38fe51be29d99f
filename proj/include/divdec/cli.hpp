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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "divdec/corpus.hpp"
#include "divdec/cost.hpp"
#include "divdec/decode.hpp"
#include "divdec/eval.hpp"
#include "divdec/ngram_lm.hpp"

namespace divdec {

inline constexpr std::size_t kBaseOrder = 5;
inline constexpr std::size_t kAuxOrder = 3;

/// Everything a CLI run needs. Paths are kept exactly as written; relative
/// ones resolve against `base_dir` (the manifest's directory).
struct RunManifest {
  std::filesystem::path base_dir;

  std::uint64_t seed = 7;
  std::string output_dir = "out";

  std::string retain_corpus = "data/retain.txt";
  std::string forget_corpus = "data/forget.txt";
  std::string facts = "data/facts.jsonl";
  std::string vocab = "data/vocab.txt";
  std::string heldout = "data/heldout.txt";

  std::string base_model = "models/base.lm";
  std::string forget_model = "models/forget.lm";
  std::string retain_model = "models/retain.lm";
  std::string retrain_model = "models/retrain.lm";

  CorpusSpec synthetic;
  std::size_t heldout_docs = 200;

  DecodeConfig decode;  // decode.seed mirrors `seed`
  std::vector<DecodeConfig> grid = trigram_grid();
  ProbeKind probe = ProbeKind::verbatim;
  std::size_t threads = 1;
  std::size_t kl_prefixes = 500;

  std::optional<Scenario> scenario;
  std::optional<CostParams> cost;

  std::filesystem::path resolve(const std::string& path) const;
  bool operator==(const RunManifest& other) const;
};

// JSON text. Unknown keys are rejected so typos fail loudly.
RunManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);
std::string manifest_to_json(const RunManifest& manifest);
RunManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const RunManifest& manifest);

DecodeConfig parse_decode_config(std::string_view json_text);

// Subcommands. Each writes human-readable output to `out` and files under
// the manifest's paths; failures throw divdec::Error.
void cmd_gen(const RunManifest& m, std::ostream& out);
void cmd_train(const RunManifest& m, std::ostream& out);

struct DecodeRequest {
  std::string prompt;  // whitespace-tokenized words, BOS added
  bool trace = false;
};
void cmd_decode(const RunManifest& m, const DecodeRequest& request, std::ostream& out);

void cmd_sweep(const RunManifest& m, std::ostream& out);
void cmd_eval(const RunManifest& m, std::ostream& out);
void cmd_scenario(const RunManifest& m, std::ostream& out);
void cmd_cost(const CostParams& params, std::ostream& out);

/// Stateless request handler for the line protocol. Each request is one JSON
/// object per line; each response is one line.
class Sidecar {
 public:
  // `base` may be null, in which case requests must carry base_logits.
  Sidecar(std::shared_ptr<const LogitSource> base, std::shared_ptr<const LogitSource> forget_side,
          std::shared_ptr<const LogitSource> retain_side);

  std::size_t vocab_size() const { return forget_->vocab_size(); }

  // Never throws for malformed input; errors become error responses.
  std::string handle(std::string_view line) const;

  // Answers every line of `in` on `out`, in order, until EOF.
  void serve_stream(std::istream& in, std::ostream& out) const;

 private:
  std::shared_ptr<const LogitSource> base_;
  std::shared_ptr<const LogitSource> forget_;
  std::shared_ptr<const LogitSource> retain_;
};

/// Loopback TCP listener; one thread per connection, requests on a
/// connection answered in order.
class TcpServer {
 public:
  explicit TcpServer(const Sidecar& sidecar) : sidecar_(sidecar) {}
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  // Binds 127.0.0.1:port (0 picks a free port) and starts accepting. Returns
  // the bound port.
  std::uint16_t start(std::uint16_t port);
  void stop();
  // Blocks until stop() is called from another thread.
  void wait();

 private:
  void accept_loop();
  void serve_connection(int fd);

  const Sidecar& sidecar_;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> open_fds_;
};

}  // namespace divdec
