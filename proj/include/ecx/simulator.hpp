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

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecx/common.hpp"
#include "ecx/compensation.hpp"
#include "ecx/compression.hpp"
#include "ecx/estimators.hpp"
#include "ecx/problems.hpp"

namespace ecx {

enum class Topology {
  kDoubleCompression,  // workers and server both compress
  kSingleRound,        // only the worker -> server messages are compressed
  kSingleWorker,       // n = 1, one compression per step
};

std::string to_string(Topology t);
Topology topology_from_string(const std::string& name);

struct RunConfig {
  ProblemSpec problem;
  std::int64_t workers = 1;  // n
  std::int64_t steps = 100;  // T
  double gamma = 0.01;
  std::int64_t initial_batch = 1;  // B0
  EstimatorKind estimator = EstimatorKind::kMomentum;
  AlphaSchedule schedule = AlphaSchedule::constant(0.1);
  CompressorSpec worker_compressor = CompressorSpec::one_bit();
  CompressorSpec server_compressor = CompressorSpec::one_bit();
  SchemeSpec scheme;
  BaselineTarget baseline_target = BaselineTarget::kEstimator;
  Topology topology = Topology::kDoubleCompression;
  // Plain moving-average update with no compression at all.
  bool uncompressed = false;
  double heterogeneity = 0.0;
  // Starting point; empty means the origin.
  std::vector<double> x0;
  std::uint64_t seed = 0;
  // Keep the per-step vectors the oracle needs.
  bool record = false;
  // Evaluate worker gradients on separate threads.
  bool parallel = false;

  void validate() const;
};

// Per-step vectors kept in record mode. Index t = 0..T-1; entry 0 holds the
// uncompressed start (A = v0, zero residuals).
struct StepRecord {
  double alpha = 1.0;
  DenseVector a_bar;      // (1/n) sum_i A(x_t; xi_t^(i))
  DenseVector delta_bar;  // delta_t + (1/n) sum_i delta_t^(i)
  DenseVector e_bar;      // e_t + (1/n) sum_i e_t^(i)
  DenseVector v;          // v_t
  DenseVector x;          // x_t
};

struct StepMetrics {
  std::int64_t step = 0;
  double loss = 0.0;
  double grad_norm_sq = 0.0;
  double v_norm = 0.0;
  double worker_delta_norm = 0.0;  // max over workers
  double server_delta_norm = 0.0;
  std::uint64_t cum_bits = 0;
};

struct RunTrace {
  std::vector<StepMetrics> metrics;
  // Filled by the harness when the ghost sequence is tracked.
  std::vector<double> ghost_residual_norms;
  std::vector<StepRecord> records;
  DenseVector x0;
  DenseVector final_x;
  double final_loss = 0.0;
  double final_grad_norm_sq = 0.0;
  std::int64_t steps_executed = 0;  // T_effective
};

// Non-finite state or ||x|| > 1e12. Carries the trace up to the failure.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::int64_t step, RunTrace partial);
  std::int64_t step() const { return step_; }
  const RunTrace& partial() const { return partial_; }

 private:
  std::int64_t step_;
  RunTrace partial_;
};

// Replica copies drifted apart; an internal invariant, never expected.
class ReplicaMismatch : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline constexpr double kDivergenceNorm = 1e12;

// The pieces a run needs besides the config, built once.
struct RunContext {
  Problem problem;
  std::vector<Shard> shards;
  DenseVector x0;
  std::uint64_t sampling_seed;
};

RunContext make_context(const RunConfig& config);

// Handle used for worker `worker` at step t in the main loop (t = 0 is v0).
inline SampleHandle run_handle(std::int64_t t, std::int64_t worker) {
  return {static_cast<std::uint64_t>(t), static_cast<std::uint32_t>(worker),
          kRunLane};
}

// Averages in worker-index order: (sum_i parts[i]) / n.
DenseVector ordered_mean(const std::vector<DenseVector>& parts);

class Simulator {
 public:
  explicit Simulator(RunConfig config);
  Simulator(RunConfig config, RunContext context);

  const RunConfig& config() const { return config_; }
  const RunContext& context() const { return ctx_; }

  // Executes init and steps 1..T-1, returns x_T in trace.final_x.
  RunTrace run();

 private:
  struct Worker {
    CompensationState comp;
    DenseVector x;
    DenseVector v;
    DenseVector x_prev;
  };

  void init();
  void step(std::int64_t t, RunTrace& trace);
  std::vector<DenseVector> worker_inputs(std::int64_t t);
  void record_metrics(std::int64_t t, double worker_delta, double server_delta,
                      RunTrace& trace) const;
  void check_replicas() const;
  bool diverged() const;

  RunConfig config_;
  RunContext ctx_;
  std::vector<Worker> workers_;
  CompensationState server_;
  CompressorSpec worker_spec_;
  CompressorSpec server_spec_;
  std::uint64_t bits_per_step_ = 0;
  std::uint64_t cum_bits_ = 0;
};

RunTrace run(const RunConfig& config);

}  // namespace ecx
