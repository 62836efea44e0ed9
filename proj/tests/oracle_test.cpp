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

#include <gtest/gtest.h>

#include <cmath>

#include "ecx/oracle.hpp"
#include "ecx/rng.hpp"

namespace ecx {
namespace {

bool same(const DenseVector& a, const DenseVector& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

RunConfig base_run() {
  RunConfig r;
  r.problem.kind = ProblemKind::kLinReg;
  r.problem.dim = 10;
  r.problem.samples = 128;
  r.problem.label_noise = 0.1;
  r.problem.seed = 21;
  r.workers = 1;
  r.initial_batch = 1;
  r.steps = 200;
  r.gamma = 0.05;
  r.estimator = EstimatorKind::kMomentum;
  r.schedule = AlphaSchedule::constant(0.5);
  r.scheme = {SchemeKind::kErrorCompensatedX, 1.0};
  r.seed = 5;
  r.record = true;
  return r;
}

TEST(Ghost, IdentityCompressorTracksRunExactly) {
  RunConfig r = base_run();
  r.worker_compressor = CompressorSpec::identity();
  r.server_compressor = CompressorSpec::identity();
  for (auto kind : {SchemeKind::kNoCompensation, SchemeKind::kSingle,
                    SchemeKind::kErrorCompensatedX}) {
    r.scheme.kind = kind;
    const RunTrace tr = run(r);
    const GhostTrace g = ghost_run(tr, r.gamma);
    ASSERT_EQ(g.residual.size(), tr.records.size() + 1);
    for (std::size_t t = 0; t < tr.records.size(); ++t) {
      ASSERT_TRUE(same(g.x_hat[t], tr.records[t].x)) << "t=" << t;
    }
    EXPECT_TRUE(same(g.x_hat.back(), tr.final_x));
  }
}

TEST(Ghost, ZeroStepSizeStaysAtStart) {
  RunConfig r = base_run();
  r.gamma = 0.0;
  r.x0.assign(10, 0.5);
  const RunTrace tr = run(r);
  const GhostTrace g = ghost_run(tr, 0.0);
  for (const auto& xh : g.x_hat) EXPECT_TRUE(same(xh, tr.x0));
  for (const auto& res : g.residual) EXPECT_EQ(res.norm(), 0.0);
}

TEST(Ghost, NeedsRecordedTrace) {
  RunConfig r = base_run();
  r.record = false;
  EXPECT_THROW(ghost_run(run(r), r.gamma), ConfigError);
}

TEST(Ghost, FirstResidualWithoutCompensation) {
  // None, alpha = 1: v_1 = C[A_1] = abar_1 - deltabar_1 and u_1 = abar_1, so
  // x_2 - x^_2 = gamma * deltabar_1 (x_1 = x^_1 since v_0 is uncompressed).
  RunConfig r = base_run();
  r.schedule = AlphaSchedule::constant(1.0);
  r.scheme.kind = SchemeKind::kNoCompensation;
  r.worker_compressor = CompressorSpec::one_bit();
  r.topology = Topology::kSingleRound;
  r.steps = 3;
  const RunTrace tr = run(r);
  const GhostTrace g = ghost_run(tr, r.gamma);
  EXPECT_EQ(g.residual[1].norm(), 0.0);
  const DenseVector expect = r.gamma * tr.records[1].delta_bar;
  EXPECT_LE(relative_error(g.residual[2], expect), 1e-12);
  std::vector<DenseVector> deltas;
  for (const auto& rec : tr.records) deltas.push_back(rec.delta_bar);
  const DenseVector closed =
      residual_closed_form(deltas, scheme_coefficients(SchemeKind::kNoCompensation, 1.0),
                           1.0, r.gamma, 2, -1);
  EXPECT_LE(relative_error(closed, expect), 1e-12);
}

TEST(ClosedForm, ZeroHistoryGivesZero) {
  const std::vector<DenseVector> deltas(10, DenseVector::Zero(3));
  const auto c = scheme_coefficients(SchemeKind::kErrorCompensatedX, 0.3);
  for (std::int64_t t = 0; t <= 10; ++t) {
    EXPECT_EQ(residual_closed_form(deltas, c, 0.3, 0.1, t, -1).norm(), 0.0);
  }
}

TEST(ClosedForm, MatchesRecursionOnRandomHistory) {
  // Independent oracle: run the residual recursion directly.
  //   w_t = (1-a) w_{t-1} + eta2 ebar_t - eta1 deltabar_t,
  //   ebar_t = c1 deltabar_{t-1} - c2 deltabar_{t-2},
  //   x_t - x^_t = -gamma sum_{k<t} w_k
  KeyedRng r(3, Stream::kDiagnostic, 0, 0);
  const double a = 0.3, gamma = 0.07;
  const auto c = scheme_coefficients(SchemeKind::kErrorCompensatedX, a);
  std::vector<DenseVector> deltas{DenseVector::Zero(4)};
  for (int t = 1; t < 60; ++t) {
    DenseVector d(4);
    for (Eigen::Index i = 0; i < 4; ++i) d[i] = r.normal();
    deltas.push_back(d);
  }
  DenseVector w = DenseVector::Zero(4), acc = DenseVector::Zero(4);
  for (std::int64_t t = 0; t <= 50; ++t) {
    const DenseVector expect = -gamma * acc;
    const DenseVector got = residual_closed_form(deltas, c, a, gamma, t, -1);
    EXPECT_LE(relative_error(got, expect), 1e-9) << "t=" << t;
    DenseVector ebar = DenseVector::Zero(4);
    if (t >= 1) ebar += c.c1 * deltas[t - 1];
    if (t >= 2) ebar -= c.c2 * deltas[t - 2];
    w = (1 - a) * w + c.eta2 * ebar - c.eta1 * deltas[t];
    acc += w;
  }
}

TEST(ClosedForm, RejectsBadArguments) {
  const std::vector<DenseVector> deltas(3, DenseVector::Zero(2));
  const Coefficients c;
  EXPECT_THROW(residual_closed_form(deltas, c, 0.0, 0.1, 1, -1), ConfigError);
  EXPECT_THROW(residual_closed_form(deltas, c, 0.5, 0.1, 1, 0), ConfigError);
  EXPECT_THROW(residual_closed_form(deltas, c, 0.5, 0.1, 5, -1), ConfigError);
}

TEST(VerifyIdentity, OneBitResolvesTheSign) {
  RunConfig r = base_run();
  r.worker_compressor = CompressorSpec::one_bit();
  r.server_compressor = CompressorSpec::one_bit();
  const RunTrace tr = run(r);
  const auto rep = verify_residual_identity(r, tr, 1e-9);
  EXPECT_EQ(rep.resolved_sign, "minus");
  EXPECT_LT(rep.max_rel_error_minus, 1e-9);
  EXPECT_GT(rep.max_rel_error_plus, 1e-9);
  EXPECT_EQ(rep.ecx_convention, "alpha_gamma_delta");
}

TEST(VerifyIdentity, BaselinesAtBothTargets) {
  for (auto kind : {SchemeKind::kNoCompensation, SchemeKind::kSingle}) {
    for (auto target : {BaselineTarget::kEstimator, BaselineTarget::kGradient}) {
      RunConfig r = base_run();
      r.workers = 4;
      r.initial_batch = 4;
      r.scheme.kind = kind;
      r.baseline_target = target;
      const auto rep = verify_residual_identity(r, run(r), 1e-9);
      EXPECT_EQ(rep.resolved_sign, "either");
      EXPECT_LT(rep.max_rel_error_minus, 1e-9);
    }
  }
}

TEST(VerifyIdentity, IdentityCompressorPassesTrivially) {
  RunConfig r = base_run();
  r.worker_compressor = CompressorSpec::identity();
  r.server_compressor = CompressorSpec::identity();
  const auto rep = verify_residual_identity(r, run(r), 1e-9);
  EXPECT_EQ(rep.max_rel_error_minus, 0.0);
  EXPECT_EQ(rep.max_rel_error_plus, 0.0);
}

TEST(VerifyIdentity, PreconditionsAndFailures) {
  RunConfig r = base_run();
  r.scheme.beta = 0.3;
  EXPECT_THROW(verify_residual_identity(r, run(r), 1e-9), UnsupportedConfigError);
  r = base_run();
  r.schedule = AlphaSchedule::inverse_t();
  EXPECT_THROW(verify_residual_identity(r, run(r), 1e-9), UnsupportedConfigError);
  // A trace from one scheme checked against another scheme's coefficients.
  r = base_run();
  r.scheme.kind = SchemeKind::kNoCompensation;
  const RunTrace none = run(r);
  r.scheme.kind = SchemeKind::kErrorCompensatedX;
  EXPECT_THROW(verify_residual_identity(r, none, 1e-9), IdentityFailure);
}

TEST(Residuals, NoCompensationAccumulatesErrorCompensatedXDoesNot) {
  RunConfig r = base_run();
  r.schedule = AlphaSchedule::constant(0.1);
  r.gamma = 0.01;
  auto max_norm = [&](SchemeKind kind, std::int64_t steps) {
    RunConfig c = r;
    c.scheme.kind = kind;
    c.steps = steps;
    const GhostTrace g = ghost_run(run(c), c.gamma);
    double m = 0.0;
    for (const auto& res : g.residual) m = std::max(m, res.norm());
    return m;
  };
  EXPECT_GT(max_norm(SchemeKind::kNoCompensation, 2000),
            2.0 * max_norm(SchemeKind::kNoCompensation, 100));

  RunConfig c = r;
  c.steps = 2000;
  const RunTrace tr = run(c);
  const GhostTrace g = ghost_run(tr, c.gamma);
  std::vector<double> norms;
  for (const auto& m : tr.metrics) {
    norms.push_back(m.worker_delta_norm);
    norms.push_back(m.server_delta_norm);
  }
  const double eps = measured_epsilon(norms);
  for (const auto& res : g.residual) ASSERT_LE(res.norm(), 2.0 * c.gamma * eps);
}

TEST(Residuals, SumComparisonWithIdentityIsZero) {
  RunConfig r = base_run();
  r.worker_compressor = CompressorSpec::identity();
  r.server_compressor = CompressorSpec::identity();
  const auto rep = residual_sum_comparison(r);
  ASSERT_EQ(rep.schemes.size(), 3u);
  for (const auto& s : rep.schemes) EXPECT_EQ(s.sum_sq, 0.0);
  EXPECT_EQ(rep.eps_hat, 0.0);
}

TEST(AggregatedUpdate, MatchesSimulation) {
  RunConfig r = base_run();
  r.workers = 4;
  r.initial_batch = 4;
  r.steps = 500;
  r.scheme = {SchemeKind::kErrorCompensatedX, 0.3};
  r.schedule = AlphaSchedule::inverse_linear(0.05);
  EXPECT_LE(aggregated_update_error(r, run(r)), 1e-12);
  for (auto target : {BaselineTarget::kEstimator, BaselineTarget::kGradient}) {
    r.scheme.kind = SchemeKind::kSingle;
    r.baseline_target = target;
    EXPECT_LE(aggregated_update_error(r, run(r)), 1e-12) << to_string(target);
  }
}

TEST(Diagnostic, DeterministicSgdClosedForm) {
  RunConfig r;
  r.problem.kind = ProblemKind::kQuadratic;
  r.problem.spectrum = {1.0, 2.0, 4.0};
  r.x0 = {1.0, 1.0, 1.0};
  r.estimator = EstimatorKind::kSgd;
  r.uncompressed = true;
  r.steps = 30;
  r.gamma = 0.1;
  r.record = true;
  Simulator sim(r);
  const RunTrace tr = sim.run();
  const GhostTrace g = ghost_run(tr, r.gamma);
  const auto u_hat = ghost_hat(sim, tr, g);
  const double L = sim.context().problem.smoothness_L();
  const AtDiagnostic at = diagnostic_At(g, u_hat, sim.context().problem, L, r.gamma);
  EXPECT_FALSE(at.warning.has_value());
  for (std::size_t t = 0; t < at.values.size(); ++t) {
    const double n2 = sim.context().problem.full_grad(g.x_hat[t]).squaredNorm();
    const double expect = -(1 - 2 * L * r.gamma) * n2 - n2 / 4;
    EXPECT_NEAR(at.values[t], expect, 1e-12 * std::abs(expect));
  }
}

TEST(Diagnostic, ZeroStepSizeIsConstant) {
  RunConfig r;
  r.problem.kind = ProblemKind::kQuadratic;
  r.problem.spectrum = {1.0, 3.0};
  r.x0 = {1.0, -1.0};
  r.estimator = EstimatorKind::kMomentum;
  r.schedule = AlphaSchedule::constant(0.2);
  r.worker_compressor = CompressorSpec::one_bit();
  r.server_compressor = CompressorSpec::one_bit();
  r.steps = 20;
  r.gamma = 0.0;
  r.record = true;
  Simulator sim(r);
  const RunTrace tr = sim.run();
  const GhostTrace g = ghost_run(tr, 0.0);
  const auto at = diagnostic_At(g, ghost_hat(sim, tr, g), sim.context().problem, 3.0, 0.0);
  for (double v : at.values) EXPECT_NEAR(v, at.values.front(), 1e-12 * std::abs(v));
}

TEST(Diagnostic, WarnsAboveInverseSmoothness) {
  GhostTrace g;
  g.x_hat = {DenseVector::Ones(1)};
  ProblemSpec s;
  s.kind = ProblemKind::kQuadratic;
  s.spectrum = {2.0};
  Problem p(s);
  const auto at = diagnostic_At(g, {DenseVector::Ones(1)}, p, 2.0, 0.6);
  EXPECT_TRUE(at.warning.has_value());
  EXPECT_THROW(diagnostic_At(g, {}, p, 2.0, 0.1), ConfigError);
}

TEST(Diagnostic, MomentumTrendBelowVarianceTerm) {
  RunConfig r;
  r.problem.kind = ProblemKind::kQuadratic;
  r.problem.spectrum = {0.5, 1.0, 2.0, 4.0};
  r.problem.grad_noise = 0.5;
  r.x0 = {1, 1, 1, 1};
  r.estimator = EstimatorKind::kMomentum;
  const double a = 0.1;
  r.schedule = AlphaSchedule::constant(a);
  r.uncompressed = true;
  r.steps = 4000;
  const double L = 4.0;
  r.gamma = a / (12 * L);
  r.record = true;
  Simulator sim(r);
  const RunTrace tr = sim.run();
  const GhostTrace g = ghost_run(tr, r.gamma);
  const auto at = diagnostic_At(g, ghost_hat(sim, tr, g), sim.context().problem, L, r.gamma);
  const double sigma2 =
      variance_sigma2(sim.context().problem, sim.context().shards[0], tr.x0, 2000, 1);
  double mean = 0.0;
  for (double v : at.values) mean += v;
  mean /= static_cast<double>(at.values.size());
  EXPECT_LE(mean, 3.0 * (17.0 / 3.0) * r.gamma * L * sigma2);
}

}  // namespace
}  // namespace ecx
