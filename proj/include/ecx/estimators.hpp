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
#include <functional>
#include <string>

#include "ecx/common.hpp"

namespace ecx {

enum class ScheduleKind { kConstant, kInverseT, kInverseLinear, kPowerTwoThirds };

// Step weight alpha_t of the moving-average estimator.
//   kConstant        alpha_t = value
//   kInverseT        alpha_t = 1 / t
//   kInverseLinear   alpha_t = 1 / (1 + value * t)      (value = c0)
//   kPowerTwoThirds  alpha_t = 1 / value^(2/3)          (value = horizon T)
// Indices t <= 0 reuse alpha_1.
struct AlphaSchedule {
  ScheduleKind kind = ScheduleKind::kConstant;
  double value = 1.0;

  static AlphaSchedule constant(double a) { return {ScheduleKind::kConstant, a}; }
  static AlphaSchedule inverse_t() { return {ScheduleKind::kInverseT, 0.0}; }
  static AlphaSchedule inverse_linear(double c0) {
    return {ScheduleKind::kInverseLinear, c0};
  }
  static AlphaSchedule power_two_thirds(double horizon) {
    return {ScheduleKind::kPowerTwoThirds, horizon};
  }

  void validate() const;
  bool is_constant() const {
    return kind == ScheduleKind::kConstant ||
           kind == ScheduleKind::kPowerTwoThirds;
  }
};

double alpha(const AlphaSchedule& schedule, std::int64_t t);

enum class EstimatorKind { kSgd, kMomentum, kStorm, kRootSgd, kIgt };

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);
std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

// grad(point) evaluates the stochastic gradient at `point` with the sample
// pinned by the caller, so repeated calls see the same xi_t.
using PinnedGradient = std::function<DenseVector(const DenseVector& point)>;

struct EstimatorState {
  EstimatorKind kind = EstimatorKind::kMomentum;
  AlphaSchedule schedule;
  DenseVector v;
  DenseVector x_prev;

  // SGD ignores the schedule and always uses alpha = 1.
  double alpha_at(std::int64_t t) const {
    return kind == EstimatorKind::kSgd ? 1.0 : alpha(schedule, t);
  }
};

// The gradient-estimator input A(x_t; xi_t) for the given kind.
DenseVector eval_A(EstimatorKind kind, const DenseVector& x_t,
                   const DenseVector& x_prev, double alpha_t,
                   const PinnedGradient& grad);

// v <- (1 - alpha) v + alpha a; returns the new v.
const DenseVector& update_v(EstimatorState& state, const DenseVector& a_t,
                            double alpha_t);

// Moving-average recursion without state: (1 - alpha) v + alpha a.
inline DenseVector moving_average(const DenseVector& v, const DenseVector& a,
                                  double alpha_t) {
  return (1.0 - alpha_t) * v + alpha_t * a;
}

// Mean gradient at x0 over `batch` fresh samples drawn by `worker`.
using BatchGradient = std::function<DenseVector(std::int64_t worker,
                                                std::int64_t batch)>;

// v_0: total batch B0 split as evenly as possible over n workers (the first
// B0 % n workers take one extra sample), averaged over all B0 samples.
DenseVector init_v0(std::int64_t dim, std::int64_t total_batch,
                    std::int64_t n_workers, const BatchGradient& grad);

}  // namespace ecx
