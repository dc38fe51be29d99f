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

// divdec command-line tool. See README.md for the manifest format.

#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "divdec/cli.hpp"

namespace {

int exit_code(divdec::ErrorKind kind) {
  switch (kind) {
    case divdec::ErrorKind::usage:
      return 2;
    case divdec::ErrorKind::io:
      return 3;
    case divdec::ErrorKind::data:
      return 4;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Divergence decoding over n-gram models: train, decode, evaluate, serve."};
  app.require_subcommand(1);

  std::string manifest_path = "manifest.json";
  const auto add_manifest = [&](CLI::App* sub) {
    sub->add_option("-m,--manifest", manifest_path, "Run manifest (JSON)")->capture_default_str();
  };

  auto* gen = app.add_subcommand("gen", "Generate the synthetic corpus, facts, vocabulary and held-out text");
  add_manifest(gen);
  auto* train = app.add_subcommand("train", "Train base, forget-side, retain-side and retrain models");
  add_manifest(train);

  auto* decode = app.add_subcommand("decode", "Generate a continuation with divergence decoding");
  add_manifest(decode);
  std::string prompt;
  std::optional<std::string> mode;
  std::optional<double> alpha, temperature;
  std::optional<std::size_t> k, max_new;
  std::optional<std::uint64_t> seed;
  bool trace = false;
  decode->add_option("-p,--prompt", prompt, "Prompt words (BOS is prepended)");
  decode->add_option("--mode", mode, "none | linear | rank")->check(CLI::IsMember({"none", "linear", "rank"}));
  decode->add_option("--alpha", alpha, "Linear adjustment strength");
  decode->add_option("--k", k, "Number of tokens masked in rank mode");
  decode->add_option("--temperature", temperature, "Sampling temperature (0 = greedy)");
  decode->add_option("--max-new-tokens", max_new, "Generation budget");
  decode->add_option("--seed", seed, "Sampling seed");
  decode->add_flag("--trace", trace, "Print the top-5 adjusted probabilities at every step");

  auto* sweep = app.add_subcommand("sweep", "Sweep the manifest grid and select the config closest to retrain");
  add_manifest(sweep);
  auto* eval = app.add_subcommand("eval", "Evaluate the manifest decode config, including the retrain KL gap");
  add_manifest(eval);
  auto* scenario = app.add_subcommand("scenario", "Run the manifest's sustainability or scaling scenario");
  add_manifest(scenario);

  auto* cost = app.add_subcommand("cost", "Print inference FLOPs and the breakeven inference volume");
  std::optional<std::string> cost_manifest;
  divdec::CostParams params;
  cost->add_option("-m,--manifest", cost_manifest, "Manifest with a cost section (flags override it)");
  std::optional<double> N, n, e_N, e_n, d_r, d_f, I;
  cost->add_option("--N", N, "Large-model parameters");
  cost->add_option("--n", n, "Auxiliary-model parameters (each)");
  cost->add_option("--e-N", e_N, "Large-model unlearning epochs");
  cost->add_option("--e-n", e_n, "Auxiliary-model training epochs");
  cost->add_option("--d-r", d_r, "Retain tokens");
  cost->add_option("--d-f", d_f, "Forget tokens");
  cost->add_option("--I", I, "Inference tokens");

  auto* serve = app.add_subcommand("serve", "Sidecar: adjust externally supplied logits over a line protocol");
  add_manifest(serve);
  std::string transport = "stdio";
  std::uint16_t port = 0;
  bool no_base = false;
  serve->add_option("--transport", transport, "stdio | tcp")->check(CLI::IsMember({"stdio", "tcp"}));
  serve->add_option("--port", port, "TCP port on 127.0.0.1 (0 picks one)");
  serve->add_flag("--no-base", no_base, "Do not load the base model; requests must carry base_logits");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cost->parsed()) {
      if (cost_manifest) {
        const divdec::RunManifest m = divdec::load_manifest(*cost_manifest);
        if (m.cost) params = *m.cost;
      }
      if (N) params.large_params = *N;
      if (n) params.small_params = *n;
      if (e_N) params.large_epochs = *e_N;
      if (e_n) params.small_epochs = *e_n;
      if (d_r) params.retain_tokens = *d_r;
      if (d_f) params.forget_tokens = *d_f;
      if (I) params.inference_tokens = *I;
      divdec::cmd_cost(params, std::cout);
      return 0;
    }

    divdec::RunManifest m = divdec::load_manifest(manifest_path);
    if (gen->parsed()) {
      divdec::cmd_gen(m, std::cout);
    } else if (train->parsed()) {
      divdec::cmd_train(m, std::cout);
    } else if (decode->parsed()) {
      if (mode) {
        if (*mode == "linear") {
          m.decode.mode = divdec::LinearAdjust{alpha.value_or(1.0)};
        } else if (*mode == "rank") {
          m.decode.mode = divdec::RankAdjust{k.value_or(1)};
        } else {
          m.decode.mode = divdec::NoAdjust{};
        }
      } else if (alpha || k) {
        throw divdec::UsageError("--alpha and --k need --mode");
      }
      if (temperature) m.decode.temperature = *temperature;
      if (max_new) m.decode.max_new_tokens = *max_new;
      if (seed) m.seed = *seed;
      divdec::cmd_decode(m, {prompt, trace}, std::cout);
    } else if (sweep->parsed()) {
      divdec::cmd_sweep(m, std::cout);
    } else if (eval->parsed()) {
      divdec::cmd_eval(m, std::cout);
    } else if (scenario->parsed()) {
      divdec::cmd_scenario(m, std::cout);
    } else if (serve->parsed()) {
      std::shared_ptr<const divdec::LogitSource> base;
      if (!no_base) base = std::make_shared<divdec::BackoffLM>(divdec::load_lm(m.resolve(m.base_model)));
      auto forget_side = std::make_shared<divdec::BackoffLM>(divdec::load_lm(m.resolve(m.forget_model)));
      auto retain_side = std::make_shared<divdec::BackoffLM>(divdec::load_lm(m.resolve(m.retain_model)));
      const divdec::Sidecar sidecar(base, forget_side, retain_side);
      if (transport == "stdio") {
        std::ios::sync_with_stdio(false);
        sidecar.serve_stream(std::cin, std::cout);
      } else {
        divdec::TcpServer server(sidecar);
        const std::uint16_t bound = server.start(port);
        std::cerr << fmt::format("listening on 127.0.0.1:{}\n", bound);
        server.wait();
      }
    }
  } catch (const divdec::Error& e) {
    std::cerr << "divdec: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "divdec: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
