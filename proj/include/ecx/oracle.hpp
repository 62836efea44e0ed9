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

#include <optional>
#include <string>
#include <vector>

#include "ecx/common.hpp"
#include "ecx/compensation.hpp"
#include "ecx/simulator.hpp"

namespace ecx {

// Auxiliary uncompressed trajectory driven by the compressed run's A values:
//   u_0 = v_0, x^_0 = x_0
//   u_t = (1 - a_t) u_{t-1} + a_t abar_t
//   x^_{t+1} = x^_t - gamma u_t
// residual[t] = x_t - x^_t for t = 0..T.
struct GhostTrace {
  std::vector<DenseVector> u;
  std::vector<DenseVector> x_hat;
  std::vector<DenseVector> residual;
};

// Needs a trace produced with record = true.
GhostTrace ghost_run(const RunTrace& trace, double gamma);

// u^_t: the estimator rebuilt from A(x^_t; xi_t), re-evaluated at the ghost
// points with the run's own sample handles. u^_0 = v_0.
std::vector<DenseVector> ghost_hat(const Simulator& sim, const RunTrace& trace,
                                   const GhostTrace& ghost);

struct AtDiagnostic {
  std::vector<double> values;  // A_t for t = 0..T-1
  std::optional<std::string> warning;
};

// A_t = ||grad f(x^_t) - u^_t||^2 - (1 - 2 L gamma) ||u^_t||^2
//       - ||grad f(x^_t)||^2 / 4
AtDiagnostic diagnostic_At(const GhostTrace& ghost,
                           const std::vector<DenseVector>& u_hat,
                           const Problem& problem, double L, double gamma);

// Closed form of x_t - x^_t for beta = 1 and constant alpha, from the
// aggregated residuals delta_bar[0..t-1]. c2_sign = -1 subtracts the
// delta_{t-2} term as the filter does; +1 adds it.
DenseVector residual_closed_form(const std::vector<DenseVector>& delta_bar,
                                 const Coefficients& coeffs, double alpha,
                                 double gamma, std::int64_t t, int c2_sign);

// ||a - b|| / max(||a||, ||b||), zero when both vanish.
double relative_error(const DenseVector& a, const DenseVector& b);

struct ResidualIdentityReport {
  double max_rel_error_minus = 0.0;
  double max_rel_error_plus = 0.0;
  // "minus", "plus" or "either" (when the delta_{t-2} term is absent).
  std::string resolved_sign;
  // Which single-term expression of the ErrorCompensatedX residual the run
  // matches: "alpha_gamma_delta" (+a_{t-1} gamma delta_{t-1}),
  // "gamma_delta" (-gamma delta_{t-1}), "neither", or "n/a".
  std::string ecx_convention;
  double ecx_convention_error = 0.0;
  std::int64_t steps = 0;
};

// Compares the ghost residual with the closed form at every step, for both
// signs of the c2 term. Throws UnsupportedConfigError unless beta = 1 and
// alpha is constant; throws IdentityFailure if neither sign is within
// `tolerance`.
ResidualIdentityReport verify_residual_identity(const RunConfig& config,
                                                const RunTrace& trace,
                                                double tolerance);

// Largest relative deviation over all steps between the simulated v_t and
//   (1 - a) v_{t-1} + a abar_t + eta2 ebar_t - eta1 deltabar_t.
double aggregated_update_error(const RunConfig& config, const RunTrace& trace);

struct SchemeResidual {
  SchemeKind scheme = SchemeKind::kNoCompensation;
  double sum_sq = 0.0;    // sum_t ||x_t - x^_t||^2
  double max_norm = 0.0;  // max_t ||x_t - x^_t||
  bool diverged = false;
  std::int64_t steps = 0;
};

struct ResidualSumReport {
  std::vector<SchemeResidual> schemes;  // none, single, ecx
  double eps_hat = 0.0;
  double gamma = 0.0;
  double alpha = 0.0;
  bool ordering_holds = false;            // ecx < single < none, strict
  bool ecx_within_gamma_eps = false;      // ecx sum <= gamma^2 eps^2
  bool ecx_within_alpha_gamma_eps = false;  // <= 1.01 gamma^2 alpha^2 eps^2
};

// Runs `base` once per scheme (everything else shared) with recording on.
ResidualSumReport residual_sum_comparison(const RunConfig& base);

}  // namespace ecx
