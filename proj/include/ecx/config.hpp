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

#include "ecx/simulator.hpp"

namespace ecx {

// Malformed config text or values. Messages name the line (syntax errors)
// or the field path (type and value errors).
class ConfigParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct Variant {
  std::string label;
  // Fields of the shared run settings that this variant replaces, kept as
  // JSON text so the config can be written back unchanged.
  std::string overrides;
  RunConfig run;
};

// Learning-rate search used by `compare`: each gamma is tried on the
// reference variant and the one with the smallest final ||grad f|| is used
// for every variant.
struct TuneSpec {
  bool enabled = false;
  std::vector<double> gammas;
  std::string reference;
};

// `sweep` grid. `alphas` replace a constant schedule value, `c0s` select the
// 1/(1 + c0 t) schedule; at most one of them may be given.
struct SweepSpec {
  std::vector<double> gammas;
  std::vector<double> alphas;
  std::vector<double> c0s;
};

struct VerifySpec {
  double tolerance = 1e-9;
  std::int64_t steps = 200;
  std::int64_t dim = 10;
  std::uint64_t seed = 7;
};

struct ExperimentConfig {
  std::string name = "experiment";
  RunConfig base;
  std::vector<Variant> variants;
  TuneSpec tune;
  SweepSpec sweep;
  VerifySpec verify;
  bool record_ghost = false;

  // Applies a new master seed to the shared settings and every variant.
  void set_seed(std::uint64_t seed);
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical text: every field written out with its value (defaults
// included), keys sorted, two-space indentation.
std::string serialize_config(const ExperimentConfig& config);

// The settings used by the linear-regression comparison: uncompressed,
// none, single and ecx variants with OneBit compression on 8 workers.
ExperimentConfig default_benchmark_config(EstimatorKind estimator);

}  // namespace ecx
