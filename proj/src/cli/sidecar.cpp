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

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "divdec/cli.hpp"

namespace divdec {
namespace {

using Json = nlohmann::json;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct RequestError {
  std::string code;
  std::string message;
};

std::string error_response(const Json& request_id, const RequestError& err) {
  Json j;
  j["request_id"] = request_id;
  j["error"] = Json{{"code", err.code}, {"message", err.message}};
  return j.dump();
}

std::string logit_text(double v) {
  if (v == kNegInf) return "null";
  return fmt::format("{:.17g}", v);
}

LogitVector read_logits(const Json& arr, std::size_t vocab_size) {
  if (!arr.is_array()) throw RequestError{"bad_request", "base_logits must be an array"};
  if (arr.size() != vocab_size) {
    throw RequestError{"vocab_mismatch",
                       fmt::format("base_logits has {} entries, vocabulary has {}", arr.size(), vocab_size)};
  }
  LogitVector out(arr.size());
  for (std::size_t v = 0; v < arr.size(); ++v) {
    if (arr[v].is_null()) {
      out[v] = kNegInf;
    } else if (arr[v].is_number()) {
      out[v] = arr[v].get<double>();
      if (!std::isfinite(out[v])) throw RequestError{"bad_request", "base_logits must be finite or null"};
    } else {
      throw RequestError{"bad_request", fmt::format("base_logits[{}] is not a number", v)};
    }
  }
  return out;
}

}  // namespace

Sidecar::Sidecar(std::shared_ptr<const LogitSource> base, std::shared_ptr<const LogitSource> forget_side,
                 std::shared_ptr<const LogitSource> retain_side)
    : base_(std::move(base)), forget_(std::move(forget_side)), retain_(std::move(retain_side)) {
  if (!forget_ || !retain_) throw UsageError("sidecar needs forget-side and retain-side models");
  if (forget_->vocab_size() != retain_->vocab_size() || (base_ && base_->vocab_size() != forget_->vocab_size())) {
    throw UsageError("sidecar models disagree on vocabulary size");
  }
}

std::string Sidecar::handle(std::string_view line) const {
  Json request_id;  // null until parsed
  try {
    Json req;
    try {
      req = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw RequestError{"bad_request", fmt::format("malformed JSON: {}", e.what())};
    }
    if (!req.is_object()) throw RequestError{"bad_request", "request must be a JSON object"};
    if (req.contains("request_id")) request_id = req["request_id"];
    if (!req.contains("request_id")) throw RequestError{"bad_request", "missing request_id"};

    const std::size_t n = vocab_size();
    TokenSeq prefix{Vocabulary::kBos};
    if (req.contains("prefix_ids")) {
      const Json& ids = req["prefix_ids"];
      if (!ids.is_array()) throw RequestError{"bad_request", "prefix_ids must be an array"};
      prefix.clear();
      for (const Json& id : ids) {
        if (!id.is_number_unsigned()) throw RequestError{"bad_request", "prefix_ids must be non-negative integers"};
        const std::uint64_t v = id.get<std::uint64_t>();
        if (v >= n) throw RequestError{"vocab_mismatch", fmt::format("token id {} outside vocabulary of size {}", v, n)};
        prefix.push_back(static_cast<TokenId>(v));
      }
    }

    const std::string mode = req.contains("mode") && req["mode"].is_string() ? req["mode"].get<std::string>() : "";
    Adjustment adjustment;
    const Json* param = req.contains("alpha_or_k") ? &req["alpha_or_k"] : nullptr;
    if (mode == "none") {
      adjustment = NoAdjust{};
    } else if (mode == "linear") {
      if (param == nullptr || !param->is_number()) throw RequestError{"bad_request", "linear mode needs numeric alpha_or_k"};
      const double alpha = param->get<double>();
      if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw RequestError{"bad_request", "alpha must be finite and >= 0"};
      adjustment = LinearAdjust{alpha};
    } else if (mode == "rank") {
      if (param == nullptr || !param->is_number_unsigned()) {
        throw RequestError{"bad_request", "rank mode needs a non-negative integer alpha_or_k"};
      }
      const std::uint64_t k = param->get<std::uint64_t>();
      if (k >= n) throw RequestError{"bad_request", fmt::format("k={} must be below the vocabulary size {}", k, n)};
      adjustment = RankAdjust{static_cast<std::size_t>(k)};
    } else {
      throw RequestError{"bad_request", "mode must be none, linear or rank"};
    }

    const std::string want = req.contains("want") && req["want"].is_string() ? req["want"].get<std::string>() : "";
    if (want != "logits" && want != "token") throw RequestError{"bad_request", "want must be 'logits' or 'token'"};
    std::uint64_t seed = 0;
    if (req.contains("seed")) {
      if (!req["seed"].is_number_unsigned()) throw RequestError{"bad_request", "seed must be a non-negative integer"};
      seed = req["seed"].get<std::uint64_t>();
    }

    LogitVector base;
    if (req.contains("base_logits") && !req["base_logits"].is_null()) {
      base = read_logits(req["base_logits"], n);
    } else if (base_) {
      base = base_->logits(prefix);
    } else {
      throw RequestError{"bad_request", "base_logits required: no base model loaded"};
    }
    const LogitVector lp = forget_->logits(prefix);
    const LogitVector lq = retain_->logits(prefix);
    const LogitVector adjusted = apply_adjustment(adjustment, base, lp, lq);
    std::size_t masked = 0;
    for (double x : adjusted) masked += x == kNegInf ? 1 : 0;

    std::string out = fmt::format("{{\"request_id\":{}", request_id.dump());
    if (want == "logits") {
      out += ",\"adjusted_logits\":[";
      for (std::size_t v = 0; v < adjusted.size(); ++v) {
        if (v > 0) out += ',';
        out += logit_text(adjusted[v]);
      }
      out += ']';
    } else {
      DecodeConfig cfg;
      cfg.seed = seed;
      Rng rng(seed);
      out += fmt::format(",\"token_id\":{}", sample_next(adjusted, cfg, rng));
    }
    out += fmt::format(",\"masked_count\":{}}}", masked);
    return out;
  } catch (const RequestError& e) {
    return error_response(request_id, e);
  } catch (const Error& e) {
    return error_response(request_id, {"bad_request", e.what()});
  } catch (const std::exception& e) {
    return error_response(request_id, {"internal", e.what()});
  }
}

void Sidecar::serve_stream(std::istream& in, std::ostream& out) const {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out << handle(line) << '\n';
    out.flush();
  }
}

TcpServer::~TcpServer() { stop(); }

std::uint16_t TcpServer::start(std::uint16_t port) {
  if (listen_fd_ >= 0) throw UsageError("server already started");
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw IoError(fmt::format("socket: {}", std::strerror(errno)));
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 16) != 0) {
    const std::string msg = std::strerror(errno);
    ::close(fd);
    throw IoError(fmt::format("cannot listen on 127.0.0.1:{}: {}", port, msg));
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  listen_fd_ = fd;
  stopping_ = false;
  acceptor_ = std::thread([this] { accept_loop(); });
  return ntohs(addr.sin_port);
}

void TcpServer::accept_loop() {
  while (!stopping_) {
    const int conn = ::accept(listen_fd_, nullptr, nullptr);
    if (conn < 0) {
      if (errno == EINTR) continue;
      break;
    }
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(conn);
      break;
    }
    open_fds_.push_back(conn);
    workers_.emplace_back([this, conn] { serve_connection(conn); });
  }
}

void TcpServer::serve_connection(int fd) {
  std::string buffer;
  char chunk[4096];
  bool open = true;
  while (open) {
    const ssize_t got = ::recv(fd, chunk, sizeof chunk, 0);
    if (got <= 0) {
      if (got < 0 && errno == EINTR) continue;
      break;
    }
    buffer.append(chunk, static_cast<std::size_t>(got));
    std::size_t start = 0;
    for (std::size_t nl; (nl = buffer.find('\n', start)) != std::string::npos; start = nl + 1) {
      std::string_view line(buffer.data() + start, nl - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.empty()) continue;
      const std::string response = sidecar_.handle(line) + "\n";
      std::size_t sent = 0;
      while (sent < response.size()) {
        const ssize_t n = ::send(fd, response.data() + sent, response.size() - sent, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
          open = false;
          break;
        }
        sent += static_cast<std::size_t>(n);
      }
      if (!open) break;
    }
    buffer.erase(0, start);
  }
  ::shutdown(fd, SHUT_RDWR);
}

void TcpServer::stop() {
  if (listen_fd_ < 0) return;
  stopping_ = true;
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (std::thread& t : workers) t.join();
  for (int fd : open_fds_) ::close(fd);
  open_fds_.clear();
  ::close(listen_fd_);
  listen_fd_ = -1;
}

void TcpServer::wait() {
  if (acceptor_.joinable()) acceptor_.join();
}

}  // namespace divdec
