// Copyright 2026 The ECX-Sim Authors. All Rights Reserved.
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
// =============================================================================

// ecxsim: command-line driver for the compressed-training simulator.
//
//   ecxsim run|compare|verify|sweep --config <path> --out <dir>
//          [--seed <u64>] [--record-ghost]
//
// Exit codes: 0 success, 1 usage or config error, 2 verification failure,
// 3 unexpected divergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "ecx/config.hpp"
#include "ecx/experiments.hpp"
#include "ecx/metrics_csv.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerify = 2;
constexpr int kExitDiverged = 3;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool record_ghost = false;
  bool tune = false;
};

ecx::ExperimentConfig load(const Options& o) {
  ecx::ExperimentConfig cfg = ecx::load_config(o.config);
  if (o.seed) {
    cfg.set_seed(*o.seed);
    cfg.verify.seed = *o.seed;
  }
  if (o.record_ghost) cfg.record_ghost = true;
  return cfg;
}

void report_divergence(const ecx::VariantOutcome& v) {
  std::cerr << "variant " << v.label << " diverged at step "
            << v.divergence_step
            << (v.expected_divergence ? " (expected without compensation)"
                                      : " (unexpected)")
            << '\n';
}

int cmd_run(const Options& o) {
  const ecx::ExperimentConfig cfg = load(o);
  std::filesystem::create_directories(o.out);
  const ecx::VariantOutcome v =
      ecx::run_variant(cfg.name, cfg.base, cfg.record_ghost);
  ecx::write_metrics_csv(v.trace, o.out + "/" + cfg.name + ".csv");
  std::ofstream s(o.out + "/summary.txt", std::ios::binary);
  s << "experiment=" << cfg.name << '\n'
    << "steps=" << v.trace.steps_executed << '\n'
    << "final_loss=" << ecx::format_double(v.trace.final_loss) << '\n'
    << "final_grad_norm=" << ecx::format_double(v.final_grad_norm) << '\n'
    << "diverged=" << (v.diverged ? "true" : "false") << '\n';
  std::cout << "final_grad_norm=" << ecx::format_double(v.final_grad_norm)
            << '\n';
  if (v.diverged) {
    report_divergence(v);
    return v.expected_divergence ? kExitOk : kExitDiverged;
  }
  return kExitOk;
}

int cmd_compare(const Options& o) {
  const ecx::ExperimentConfig cfg = load(o);
  const bool tune = o.tune || cfg.tune.enabled;
  const ecx::CompareSummary s = ecx::compare(cfg, tune, cfg.record_ghost);
  ecx::write_compare_outputs(s, cfg, o.out);
  std::cout << "gamma=" << ecx::format_double(s.gamma) << '\n';
  for (const auto& v : s.variants) {
    std::cout << v.label << ": log10_grad_norm="
              << ecx::format_double(v.log10_grad_norm)
              << " log10_gap=" << ecx::format_double(v.log10_gap) << '\n';
    if (v.diverged) report_divergence(v);
  }
  return s.unexpected_divergence() ? kExitDiverged : kExitOk;
}

int cmd_verify(const Options& o) {
  const ecx::ExperimentConfig cfg = load(o);
  const ecx::VerifyReport rep = ecx::verify_suite(cfg.verify);
  const std::string text = rep.to_text();
  std::filesystem::create_directories(o.out);
  std::ofstream(o.out + "/verify.txt", std::ios::binary) << text;
  std::cout << text;
  return rep.passed() ? kExitOk : kExitVerify;
}

int cmd_sweep(const Options& o) {
  const ecx::ExperimentConfig cfg = load(o);
  const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  const auto cells = ecx::run_sweep(cfg, o.out, cfg.record_ghost, threads);
  bool unexpected = false;
  for (const auto& c : cells) {
    std::cout << c.file << ": gamma=" << ecx::format_double(c.gamma)
              << " param=" << ecx::format_double(c.param)
              << " final_grad_norm="
              << ecx::format_double(c.outcome.final_grad_norm) << '\n';
    if (c.outcome.diverged) {
      report_divergence(c.outcome);
      unexpected = unexpected || !c.outcome.expected_divergence;
    }
  }
  return unexpected ? kExitDiverged : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for error-compensated compressed training"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--seed", seed, "override the master seed");
    sub->add_flag("--record-ghost", o.record_ghost,
                  "track the ghost residual norm column");
  };
  CLI::App* run = app.add_subcommand("run", "run the shared settings once");
  CLI::App* cmp = app.add_subcommand("compare", "run every variant");
  CLI::App* ver = app.add_subcommand("verify", "run the residual oracle suite");
  CLI::App* swp = app.add_subcommand("sweep", "grid over gamma and alpha/c0");
  for (CLI::App* sub : {run, cmp, ver, swp}) add_common(sub);
  cmp->add_flag("--tune", o.tune, "pick gamma from the config's grid first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  for (CLI::App* sub : {run, cmp, ver, swp}) {
    if (sub->count("--seed") > 0) o.seed = seed;
  }

  try {
    if (*run) return cmd_run(o);
    if (*cmp) return cmd_compare(o);
    if (*ver) return cmd_verify(o);
    if (*swp) return cmd_sweep(o);
  } catch (const ecx::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
