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

#include "ecx/compensation.hpp"

#include <utility>

namespace ecx {

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::kNoCompensation: return "none";
    case SchemeKind::kSingle: return "single";
    case SchemeKind::kErrorCompensatedX: return "ecx";
  }
  return "?";
}

SchemeKind scheme_kind_from_string(const std::string& name) {
  for (auto k : {SchemeKind::kNoCompensation, SchemeKind::kSingle,
                 SchemeKind::kErrorCompensatedX}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown scheme kind '" + name + "'");
}

std::string to_string(BaselineTarget t) {
  return t == BaselineTarget::kEstimator ? "estimator" : "gradient";
}

BaselineTarget baseline_target_from_string(const std::string& name) {
  if (name == "estimator") return BaselineTarget::kEstimator;
  if (name == "gradient") return BaselineTarget::kGradient;
  throw ConfigError("unknown baseline target '" + name + "'");
}

Coefficients scheme_coefficients(SchemeKind kind, double alpha_t) {
  switch (kind) {
    case SchemeKind::kNoCompensation:
      return {1.0, 0.0, 0.0, 0.0};
    case SchemeKind::kSingle:
      return {1.0, 1.0, 1.0, 0.0};
    case SchemeKind::kErrorCompensatedX:
      return {alpha_t, alpha_t, 2.0 - alpha_t, 1.0 - alpha_t};
  }
  return {};
}

Coefficients effective_coefficients(SchemeKind kind, double alpha_t,
                                    BaselineTarget target) {
  Coefficients c = scheme_coefficients(kind, alpha_t);
  if (kind != SchemeKind::kErrorCompensatedX &&
      target == BaselineTarget::kGradient) {
    c.eta1 *= alpha_t;
    c.eta2 *= alpha_t;
  }
  return c;
}

const DenseVector& filter_update(CompensationState& state, double beta,
                                 const AlphaWindow& alphas, SchemeKind kind) {
  if (!(alphas.now > 0.0)) {
    throw ConfigError("filter_update: alpha_t must be positive");
  }
  switch (kind) {
    case SchemeKind::kNoCompensation:
      state.e.setZero();
      break;
    case SchemeKind::kSingle:
      state.e = (1.0 - beta) * state.e + beta * state.delta_1;
      break;
    case SchemeKind::kErrorCompensatedX: {
      const double w1 = alphas.prev / alphas.now * (2.0 - alphas.now);
      const double w2 = alphas.prev2 / alphas.now * (1.0 - alphas.now);
      state.e = (1.0 - beta) * state.e +
                beta * (w1 * state.delta_1 - w2 * state.delta_2);
      break;
    }
  }
  return state.e;
}

DenseVector compensate(const DenseVector& input, const DenseVector& e_t) {
  require_same_dim(input, e_t, "compensate");
  return input + e_t;
}

void shift_deltas(CompensationState& state, const DenseVector& new_delta) {
  require_same_dim(state.delta_1, new_delta, "shift_deltas");
  state.delta_2 = std::move(state.delta_1);
  state.delta_1 = new_delta;
}

DenseVector unified_v_update(const DenseVector& v_prev, const DenseVector& a_t,
                             double alpha_t, const Coefficients& coeffs,
                             const DenseVector& delta_t,
                             const DenseVector& e_t) {
  return (1.0 - alpha_t) * v_prev + alpha_t * a_t - coeffs.eta1 * delta_t +
         coeffs.eta2 * e_t;
}

}  // namespace ecx
