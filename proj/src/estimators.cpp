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

#include "ecx/estimators.hpp"

#include <cmath>

namespace ecx {

void AlphaSchedule::validate() const {
  switch (kind) {
    case ScheduleKind::kConstant:
      require(value > 0.0 && value <= 1.0,
              "schedule: constant alpha must lie in (0, 1]");
      break;
    case ScheduleKind::kInverseT:
      break;
    case ScheduleKind::kInverseLinear:
      require(value > 0.0, "schedule: c0 must be positive");
      break;
    case ScheduleKind::kPowerTwoThirds:
      require(value >= 1.0, "schedule: horizon T must be >= 1");
      break;
  }
}

double alpha(const AlphaSchedule& schedule, std::int64_t t) {
  const auto s = static_cast<double>(t < 1 ? 1 : t);
  switch (schedule.kind) {
    case ScheduleKind::kConstant:
      return schedule.value;
    case ScheduleKind::kInverseT:
      return 1.0 / s;
    case ScheduleKind::kInverseLinear:
      return 1.0 / (1.0 + schedule.value * s);
    case ScheduleKind::kPowerTwoThirds:
      return 1.0 / std::cbrt(schedule.value * schedule.value);
  }
  return 1.0;
}

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kSgd: return "sgd";
    case EstimatorKind::kMomentum: return "momentum";
    case EstimatorKind::kStorm: return "storm";
    case EstimatorKind::kRootSgd: return "rootsgd";
    case EstimatorKind::kIgt: return "igt";
  }
  return "?";
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
  for (auto k : {EstimatorKind::kSgd, EstimatorKind::kMomentum,
                 EstimatorKind::kStorm, EstimatorKind::kRootSgd,
                 EstimatorKind::kIgt}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown estimator kind '" + name + "'");
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kConstant: return "constant";
    case ScheduleKind::kInverseT: return "inverse_t";
    case ScheduleKind::kInverseLinear: return "inverse_linear";
    case ScheduleKind::kPowerTwoThirds: return "power_two_thirds";
  }
  return "?";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  for (auto k : {ScheduleKind::kConstant, ScheduleKind::kInverseT,
                 ScheduleKind::kInverseLinear, ScheduleKind::kPowerTwoThirds}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown schedule kind '" + name + "'");
}

DenseVector eval_A(EstimatorKind kind, const DenseVector& x_t,
                   const DenseVector& x_prev, double alpha_t,
                   const PinnedGradient& grad) {
  if (!(alpha_t > 0.0)) throw ConfigError("eval_A: alpha_t must be positive");
  require_same_dim(x_t, x_prev, "eval_A");
  switch (kind) {
    case EstimatorKind::kSgd:
    case EstimatorKind::kMomentum:
      return grad(x_t);
    case EstimatorKind::kStorm:
    case EstimatorKind::kRootSgd: {
      // Same sample at both points; the correction cancels when
      // x_prev == x_t.
      const DenseVector g_now = grad(x_t);
      const DenseVector g_prev = grad(x_prev);
      return (g_now - (1.0 - alpha_t) * g_prev) / alpha_t;
    }
    case EstimatorKind::kIgt: {
      const double reach = (1.0 - alpha_t) / alpha_t;
      const DenseVector point = x_t + reach * (x_t - x_prev);
      return grad(point);
    }
  }
  return grad(x_t);
}

const DenseVector& update_v(EstimatorState& state, const DenseVector& a_t,
                            double alpha_t) {
  require_same_dim(state.v, a_t, "update_v");
  state.v = moving_average(state.v, a_t, alpha_t);
  return state.v;
}

DenseVector init_v0(std::int64_t dim, std::int64_t total_batch,
                    std::int64_t n_workers, const BatchGradient& grad) {
  require(total_batch >= 1, "init_v0: initial batch B0 must be >= 1");
  require(n_workers >= 1, "init_v0: need at least one worker");
  // Accumulate offsets from the first worker's mean so that identical
  // worker means reproduce that mean exactly.
  DenseVector reference;
  DenseVector offset = DenseVector::Zero(dim);
  const std::int64_t base = total_batch / n_workers;
  const std::int64_t extra = total_batch % n_workers;
  const auto total = static_cast<double>(total_batch);
  for (std::int64_t i = 0; i < n_workers; ++i) {
    const std::int64_t b = base + (i < extra ? 1 : 0);
    if (b == 0) continue;
    DenseVector g = grad(i, b);
    if (reference.size() == 0) {
      reference = std::move(g);
      continue;
    }
    offset += (static_cast<double>(b) / total) * (g - reference);
  }
  return reference + offset;
}

}  // namespace ecx
