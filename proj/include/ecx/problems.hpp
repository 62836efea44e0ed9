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
#include <span>
#include <string>
#include <vector>

#include "ecx/common.hpp"

namespace ecx {

enum class ProblemKind { kQuadratic, kLinReg, kLogReg };

std::string to_string(ProblemKind kind);
ProblemKind problem_kind_from_string(const std::string& name);

// Synthetic objective description. Fields irrelevant to `kind` are ignored.
struct ProblemSpec {
  ProblemKind kind = ProblemKind::kLinReg;
  // Quadratic: f(x) = 1/2 sum_i spectrum_i x_i^2, gradients perturbed by
  // additive N(0, grad_noise^2 I) noise.
  std::vector<double> spectrum;
  double grad_noise = 0.0;
  // LinReg / LogReg: N Gaussian rows with covariance eigenvalues log-spaced
  // from 1 down to 1/condition.
  std::int64_t dim = 20;
  std::int64_t samples = 512;
  double condition = 10.0;
  double label_noise = 0.1;  // LinReg
  double regularizer = 0.0;  // LogReg
  std::int64_t batch_size = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Pins a minibatch and its noise draws. Re-evaluating a gradient with the
// same handle always sees the same sample.
struct SampleHandle {
  std::uint64_t step = 0;
  std::uint32_t worker = 0;
  std::uint32_t lane = 0;
};

// Sample lanes; the run loop and v0 never collide with diagnostics.
inline constexpr std::uint32_t kRunLane = 0;
inline constexpr std::uint32_t kDiagnosticLane = 2;

// Indices of the samples visible to one worker. A population shard stands
// for the whole (infinite) distribution of a sample-free problem.
struct Shard {
  std::vector<std::int64_t> indices;
  bool population = false;
};

class Problem {
 public:
  // Generates the dataset (if any) from spec.seed.
  explicit Problem(ProblemSpec spec);
  // Wraps an explicit dataset (rows of `features`, `targets`).
  Problem(ProblemKind kind, DenseMatrix features, DenseVector targets,
          double regularizer, std::int64_t batch_size, std::uint64_t seed);

  const ProblemSpec& spec() const { return spec_; }
  ProblemKind kind() const { return spec_.kind; }
  Eigen::Index dim() const { return dim_; }
  std::int64_t sample_count() const { return features_.rows(); }
  std::int64_t batch_size() const { return spec_.batch_size; }

  const DenseMatrix& features() const { return features_; }
  const DenseVector& targets() const { return targets_; }
  // Parameter that generated the labels (zero for the quadratic).
  const DenseVector& true_parameter() const { return truth_; }

  double loss(const DenseVector& x) const;
  DenseVector full_grad(const DenseVector& x) const;
  // Gradient of f_i, the loss restricted to `shard`.
  DenseVector shard_grad(const Shard& shard, const DenseVector& x) const;

  // Minibatch drawn with replacement from the shard; the same handle
  // always returns the same indices. A batch as large as the shard returns
  // the whole shard. Empty for population shards.
  std::vector<std::int64_t> minibatch_indices(const Shard& shard,
                                              const SampleHandle& handle,
                                              std::uint64_t sampling_seed,
                                              std::int64_t batch = 0) const;

  // Gradient of the minibatch loss (plus additive noise for the quadratic).
  // batch <= 0 uses the problem's batch size.
  DenseVector stoch_grad(const Shard& shard, const DenseVector& x,
                         const SampleHandle& handle,
                         std::uint64_t sampling_seed,
                         std::int64_t batch = 0) const;

  // L: Lipschitz constant of grad f. Closed form for Quadratic / LinReg,
  // ||X||_op^2 / (4N) + lambda for LogReg.
  double smoothness_L() const;
  // L_F: Lipschitz constant of every per-sample gradient.
  double smoothness_LF() const;

  // f* and a minimiser, when they have a closed form (Quadratic, LinReg
  // with a full-rank design).
  std::optional<double> optimal_value() const;
  std::optional<DenseVector> minimizer() const;

 private:
  void generate();
  DenseVector rows_grad(std::span<const std::int64_t> rows,
                        const DenseVector& x) const;
  std::int64_t effective_batch(std::int64_t batch) const;

  ProblemSpec spec_;
  Eigen::Index dim_ = 0;
  DenseMatrix features_;
  DenseVector targets_;
  DenseVector truth_;
  DenseVector spectrum_;
};

// Splits the samples over n workers. heterogeneity 0 gives an iid random
// split, 1 a split of the target-sorted data into contiguous blocks; values
// in between blend the two orderings. Shard sizes differ by at most one.
std::vector<Shard> partition_data(const Problem& problem, std::int64_t n,
                                  std::uint64_t seed, double heterogeneity);

// Empirical E||grad F(x; xi) - grad f_i(x)||^2 over `trials` minibatches.
double variance_sigma2(const Problem& problem, const Shard& shard,
                       const DenseVector& x, std::int64_t trials,
                       std::uint64_t seed, std::int64_t batch = 0);

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration_max_eig(const DenseMatrix& m, int max_iters = 10000,
                               double tol = 1e-14);

// Dataset snapshot: header x0,...,x{d-1},y then one row per sample, 17
// significant digits.
void export_dataset_csv(const Problem& problem, const std::string& path);
Problem import_dataset_csv(const std::string& path, ProblemKind kind,
                           double regularizer, std::int64_t batch_size,
                           std::uint64_t seed);

}  // namespace ecx
