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

#include "ecx/common.hpp"

namespace ecx {

enum class SchemeKind { kNoCompensation, kSingle, kErrorCompensatedX };

std::string to_string(SchemeKind kind);
SchemeKind scheme_kind_from_string(const std::string& name);

// beta is the low-pass filter weight; beta = 1 keeps no filter memory.
struct SchemeSpec {
  SchemeKind kind = SchemeKind::kErrorCompensatedX;
  double beta = 0.3;

  void validate() const {
    require(beta > 0.0 && beta <= 1.0, "scheme: beta must lie in (0, 1]");
  }
};

// Where a baseline scheme (no compensation, single compensation) applies the
// compressor:
//   kEstimator  compress the whole estimator (1-a) v + a A + e and use the
//               result as v (eta_1 = eta_2 = 1 in the unified form)
//   kGradient   compress A + e and feed it through the moving average, like
//               ErrorCompensatedX (eta_1 = eta_2 = alpha)
// ErrorCompensatedX always compresses A + e.
enum class BaselineTarget { kEstimator, kGradient };

std::string to_string(BaselineTarget t);
BaselineTarget baseline_target_from_string(const std::string& name);

// Coefficients of the unified update
//   e_t = (1 - beta) e_{t-1} + beta (c1 delta_{t-1} - c2 delta_{t-2})
//   v_t = (1 - alpha) v_{t-1} + alpha A - eta1 delta_t + eta2 e_t
struct Coefficients {
  double eta1 = 1.0;
  double eta2 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

// The reference row for each scheme:
//   none   (1, 0, 0, 0)
//   single (1, 1, 1, 0)
//   ecx    (alpha, alpha, 2 - alpha, 1 - alpha)
Coefficients scheme_coefficients(SchemeKind kind, double alpha_t);

// Coefficients realised by the simulator for a scheme compressed at `target`.
// Equal to scheme_coefficients() except for baselines compressed at the
// gradient level, where both etas are scaled by alpha.
Coefficients effective_coefficients(SchemeKind kind, double alpha_t,
                                    BaselineTarget target);

// Per-node compensation buffers. All zero at start.
struct CompensationState {
  DenseVector e;
  DenseVector delta_1;  // delta_{t-1}
  DenseVector delta_2;  // delta_{t-2}

  static CompensationState zeros(Eigen::Index d) {
    return {DenseVector::Zero(d), DenseVector::Zero(d), DenseVector::Zero(d)};
  }
};

// Step weights needed by the filter at step t.
struct AlphaWindow {
  double now = 1.0;    // alpha_t
  double prev = 1.0;   // alpha_{t-1}
  double prev2 = 1.0;  // alpha_{t-2}
};

// Computes and stores the new e_t. The delta buffers are not touched.
//   ecx:    e = (1-b) e + b ((a1/a)(2-a) d1 - (a2/a)(1-a) d2)
//   single: e = (1-b) e + b d1
//   none:   e = 0
const DenseVector& filter_update(CompensationState& state, double beta,
                                 const AlphaWindow& alphas, SchemeKind kind);

// Delta_t = input + e_t.
DenseVector compensate(const DenseVector& input, const DenseVector& e_t);

// delta_2 <- delta_1, delta_1 <- new_delta.
void shift_deltas(CompensationState& state, const DenseVector& new_delta);

// One step of the unified v-update, driven by an externally supplied
// residual and compensation signal.
DenseVector unified_v_update(const DenseVector& v_prev, const DenseVector& a_t,
                             double alpha_t, const Coefficients& coeffs,
                             const DenseVector& delta_t,
                             const DenseVector& e_t);

}  // namespace ecx
