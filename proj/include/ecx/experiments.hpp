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

#pragma once

#include <string>
#include <vector>

#include "ecx/config.hpp"
#include "ecx/simulator.hpp"

namespace ecx {

struct VariantOutcome {
  std::string label;
  RunConfig run;
  RunTrace trace;
  bool diverged = false;
  std::int64_t divergence_step = -1;
  // No-compensation runs are allowed to blow up.
  bool expected_divergence = false;
  double final_grad_norm = 0.0;
  double log10_grad_norm = 0.0;
  double log10_gap = 0.0;  // against the reference variant
};

// Runs one configuration, catching divergence. With `record_ghost` the
// ghost residual norm of every step is attached to the trace.
VariantOutcome run_variant(const std::string& label, const RunConfig& run,
                           bool record_ghost);

struct TuningPoint {
  double gamma = 0.0;
  double final_grad_norm = 0.0;
  bool diverged = false;
};

struct CompareSummary {
  std::string reference;
  double gamma = 0.0;
  std::vector<TuningPoint> tuning;
  std::vector<VariantOutcome> variants;

  bool unexpected_divergence() const;
  const VariantOutcome& variant(const std::string& label) const;
};

// Runs every variant (or the shared settings alone when there are none).
// With `tune`, gamma is first chosen on the reference variant.
CompareSummary compare(const ExperimentConfig& config, bool tune,
                       bool record_ghost);

// compare() with the gamma search forced on; the config must describe a
// STORM or IGT run with a decaying schedule.
CompareSummary benchmark_experiment(const ExperimentConfig& config);

// <out>/<label>.csv for every variant and <out>/summary.txt.
void write_compare_outputs(const CompareSummary& summary,
                           const ExperimentConfig& config,
                           const std::string& out_dir);

struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  std::string c2_sign;
  std::string ecx_convention;

  bool passed() const;
  // key=value lines.
  std::string to_text() const;
};

// Self-contained oracle suite: closed-form residual identity over schemes,
// step weights, worker counts and compressors; identity-compressor ghost
// equality; alpha = 1 collapse; aggregated update; residual ordering.
VerifyReport verify_suite(const VerifySpec& spec);

struct SweepCell {
  double gamma = 0.0;
  double param = 0.0;  // alpha or c0; 0 when not swept
  std::string file;
  VariantOutcome outcome;
};

// Grid over gamma x (alpha | c0) applied to the shared run settings. Cells
// run on up to `threads` threads; each writes <out>/<file>.
std::vector<SweepCell> run_sweep(const ExperimentConfig& config,
                                 const std::string& out_dir, bool record_ghost,
                                 unsigned threads);

}  // namespace ecx
