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

#include "ecx/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "ecx/compression.hpp"

namespace ecx {

GhostTrace ghost_run(const RunTrace& trace, double gamma) {
  if (trace.records.empty()) {
    throw ConfigError("ghost_run: trace has no recorded steps (enable record)");
  }
  const auto& recs = trace.records;
  GhostTrace g;
  g.u.reserve(recs.size());
  g.x_hat.reserve(recs.size() + 1);
  g.x_hat.push_back(trace.x0);
  g.u.push_back(recs.front().v);
  g.x_hat.push_back(trace.x0 - gamma * g.u.back());
  for (std::size_t t = 1; t < recs.size(); ++t) {
    g.u.push_back(moving_average(g.u.back(), recs[t].a_bar, recs[t].alpha));
    g.x_hat.push_back(g.x_hat.back() - gamma * g.u.back());
  }
  for (std::size_t t = 0; t < recs.size(); ++t) {
    g.residual.push_back(recs[t].x - g.x_hat[t]);
  }
  if (trace.final_x.size() == trace.x0.size()) {
    g.residual.push_back(trace.final_x - g.x_hat.back());
  } else {
    g.x_hat.pop_back();
  }
  return g;
}

std::vector<DenseVector> ghost_hat(const Simulator& sim, const RunTrace& trace,
                                   const GhostTrace& ghost) {
  if (trace.records.empty()) {
    throw ConfigError("ghost_hat: trace has no recorded steps (enable record)");
  }
  const RunConfig& cfg = sim.config();
  const RunContext& ctx = sim.context();
  const std::size_t steps = trace.records.size();
  std::vector<DenseVector> out;
  out.reserve(steps);
  out.push_back(trace.records.front().v);
  for (std::size_t t = 1; t < steps; ++t) {
    const double a = trace.records[t].alpha;
    std::vector<DenseVector> parts;
    parts.reserve(ctx.shards.size());
    for (std::size_t i = 0; i < ctx.shards.size(); ++i) {
      const SampleHandle h = run_handle(static_cast<std::int64_t>(t),
                                        static_cast<std::int64_t>(i));
      PinnedGradient grad = [&](const DenseVector& p) {
        return ctx.problem.stoch_grad(ctx.shards[i], p, h, ctx.sampling_seed);
      };
      parts.push_back(eval_A(cfg.estimator, ghost.x_hat[t],
                             ghost.x_hat[t - 1], a, grad));
    }
    out.push_back(moving_average(out.back(), ordered_mean(parts), a));
  }
  return out;
}

AtDiagnostic diagnostic_At(const GhostTrace& ghost,
                           const std::vector<DenseVector>& u_hat,
                           const Problem& problem, double L, double gamma) {
  if (u_hat.empty()) throw ConfigError("diagnostic_At: no u_hat values");
  require(u_hat.size() <= ghost.x_hat.size(),
          "diagnostic_At: more u_hat values than ghost points");
  AtDiagnostic out;
  if (L > 0.0 && gamma > 1.0 / L) {
    out.warning = "gamma exceeds 1/L; the decomposition assumes L*gamma <= 1";
  }
  out.values.reserve(u_hat.size());
  for (std::size_t t = 0; t < u_hat.size(); ++t) {
    const DenseVector g = problem.full_grad(ghost.x_hat[t]);
    out.values.push_back((g - u_hat[t]).squaredNorm() -
                         (1.0 - 2.0 * L * gamma) * u_hat[t].squaredNorm() -
                         g.squaredNorm() / 4.0);
  }
  return out;
}

DenseVector residual_closed_form(const std::vector<DenseVector>& delta_bar,
                                 const Coefficients& coeffs, double alpha,
                                 double gamma, std::int64_t t, int c2_sign) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ConfigError("residual_closed_form: alpha must lie in (0, 1]");
  }
  require(c2_sign == 1 || c2_sign == -1,
          "residual_closed_form: c2_sign must be +1 or -1");
  require(t >= 0 && static_cast<std::size_t>(std::max<std::int64_t>(t, 0)) <=
                        delta_bar.size(),
          "residual_closed_form: not enough residuals for step " +
              std::to_string(t));
  const double rho = 1.0 - alpha;
  auto weighted = [&](std::int64_t upto, std::int64_t horizon) {
    // sum_{s=0}^{upto} (1 - rho^(horizon - s)) delta_bar_s
    DenseVector acc;
    for (std::int64_t s = 0; s <= upto; ++s) {
      const double w = 1.0 - std::pow(rho, static_cast<double>(horizon - s));
      if (acc.size() == 0) acc = DenseVector::Zero(delta_bar[0].size());
      acc += w * delta_bar[static_cast<std::size_t>(s)];
    }
    return acc;
  };
  const Eigen::Index d = delta_bar.empty() ? 0 : delta_bar[0].size();
  DenseVector inner = DenseVector::Zero(d);
  if (t >= 1) inner -= (coeffs.eta1 / alpha) * weighted(t - 1, t);
  if (t >= 2) inner += (coeffs.eta2 * coeffs.c1 / alpha) * weighted(t - 2, t - 1);
  if (t >= 3) {
    inner += (c2_sign * coeffs.eta2 * coeffs.c2 / alpha) * weighted(t - 3, t - 2);
  }
  return -gamma * inner;
}

double relative_error(const DenseVector& a, const DenseVector& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale == 0.0) return 0.0;
  return (a - b).norm() / scale;
}

ResidualIdentityReport verify_residual_identity(const RunConfig& config,
                                                const RunTrace& trace,
                                                double tolerance) {
  if (config.scheme.beta != 1.0) {
    throw UnsupportedConfigError(
        "residual identity needs beta = 1 (no filter memory)");
  }
  if (config.schedule.kind != ScheduleKind::kConstant &&
      config.estimator != EstimatorKind::kSgd) {
    throw UnsupportedConfigError("residual identity needs a constant alpha");
  }
  const GhostTrace ghost = ghost_run(trace, config.gamma);
  const double alpha = trace.records.front().alpha;
  const Coefficients coeffs =
      config.uncompressed
          ? Coefficients{}
          : effective_coefficients(config.scheme.kind, alpha,
                                   config.baseline_target);
  std::vector<DenseVector> delta_bar;
  delta_bar.reserve(trace.records.size());
  for (const auto& r : trace.records) delta_bar.push_back(r.delta_bar);

  ResidualIdentityReport rep;
  rep.steps = static_cast<std::int64_t>(ghost.residual.size());
  for (std::size_t t = 0; t < ghost.residual.size(); ++t) {
    const auto tt = static_cast<std::int64_t>(t);
    const DenseVector minus =
        residual_closed_form(delta_bar, coeffs, alpha, config.gamma, tt, -1);
    const DenseVector plus =
        residual_closed_form(delta_bar, coeffs, alpha, config.gamma, tt, +1);
    rep.max_rel_error_minus = std::max(
        rep.max_rel_error_minus, relative_error(ghost.residual[t], minus));
    rep.max_rel_error_plus = std::max(rep.max_rel_error_plus,
                                      relative_error(ghost.residual[t], plus));
  }
  const bool minus_ok = rep.max_rel_error_minus < tolerance;
  const bool plus_ok = rep.max_rel_error_plus < tolerance;
  if (!minus_ok && !plus_ok) {
    throw IdentityFailure(
        "closed-form residual mismatch: max relative error " +
        std::to_string(rep.max_rel_error_minus) + " (minus), " +
        std::to_string(rep.max_rel_error_plus) + " (plus)");
  }
  rep.resolved_sign = minus_ok && plus_ok ? "either" : (minus_ok ? "minus" : "plus");

  rep.ecx_convention = "n/a";
  if (!config.uncompressed &&
      config.scheme.kind == SchemeKind::kErrorCompensatedX) {
    double err_main = 0.0;
    double err_supp = 0.0;
    for (std::size_t t = 1; t < ghost.residual.size(); ++t) {
      const DenseVector& d = delta_bar[t - 1];
      err_main = std::max(err_main,
                          relative_error(ghost.residual[t],
                                         config.gamma * alpha * d));
      err_supp = std::max(err_supp,
                          relative_error(ghost.residual[t], -config.gamma * d));
    }
    if (err_main < tolerance && err_supp < tolerance) {
      rep.ecx_convention = "both";
      rep.ecx_convention_error = std::max(err_main, err_supp);
    } else if (err_main < tolerance) {
      rep.ecx_convention = "alpha_gamma_delta";
      rep.ecx_convention_error = err_main;
    } else if (err_supp < tolerance) {
      rep.ecx_convention = "gamma_delta";
      rep.ecx_convention_error = err_supp;
    } else {
      rep.ecx_convention = "neither";
      rep.ecx_convention_error = std::min(err_main, err_supp);
    }
  }
  return rep;
}

double aggregated_update_error(const RunConfig& config, const RunTrace& trace) {
  if (trace.records.size() < 2) {
    throw ConfigError("aggregated_update_error: need at least two recorded steps");
  }
  double worst = 0.0;
  for (std::size_t t = 1; t < trace.records.size(); ++t) {
    const StepRecord& r = trace.records[t];
    const Coefficients c =
        config.uncompressed
            ? Coefficients{0.0, 0.0, 0.0, 0.0}
            : effective_coefficients(config.scheme.kind, r.alpha,
                                     config.baseline_target);
    const DenseVector closed = (1.0 - r.alpha) * trace.records[t - 1].v +
                               r.alpha * r.a_bar + c.eta2 * r.e_bar -
                               c.eta1 * r.delta_bar;
    worst = std::max(worst, relative_error(r.v, closed));
  }
  return worst;
}

ResidualSumReport residual_sum_comparison(const RunConfig& base) {
  ResidualSumReport rep;
  rep.gamma = base.gamma;
  rep.alpha = EstimatorState{base.estimator, base.schedule, {}, {}}.alpha_at(
      base.steps - 1);
  std::vector<double> norms;
  for (auto kind : {SchemeKind::kNoCompensation, SchemeKind::kSingle,
                    SchemeKind::kErrorCompensatedX}) {
    RunConfig cfg = base;
    cfg.scheme.kind = kind;
    cfg.record = true;
    RunTrace trace;
    SchemeResidual sr;
    sr.scheme = kind;
    try {
      trace = run(cfg);
    } catch (const DivergenceError& e) {
      trace = e.partial();
      sr.diverged = true;
    }
    if (!trace.records.empty()) {
      const GhostTrace g = ghost_run(trace, cfg.gamma);
      for (const auto& r : g.residual) {
        if (!r.allFinite()) {
          sr.diverged = true;
          break;
        }
        sr.sum_sq += r.squaredNorm();
        sr.max_norm = std::max(sr.max_norm, r.norm());
      }
      sr.steps = static_cast<std::int64_t>(g.residual.size());
    }
    for (const auto& m : trace.metrics) {
      if (std::isfinite(m.worker_delta_norm)) norms.push_back(m.worker_delta_norm);
      if (std::isfinite(m.server_delta_norm)) norms.push_back(m.server_delta_norm);
    }
    rep.schemes.push_back(sr);
  }
  rep.eps_hat = norms.empty() ? 0.0 : measured_epsilon(norms);
  const auto& none = rep.schemes[0];
  const auto& single = rep.schemes[1];
  const auto& ecx = rep.schemes[2];
  rep.ordering_holds = !single.diverged && !ecx.diverged &&
                       ecx.sum_sq < single.sum_sq &&
                       (none.diverged || single.sum_sq < none.sum_sq);
  const double ge = rep.gamma * rep.eps_hat;
  rep.ecx_within_gamma_eps = !ecx.diverged && ecx.sum_sq <= ge * ge;
  rep.ecx_within_alpha_gamma_eps =
      !ecx.diverged && ecx.sum_sq <= 1.01 * ge * ge * rep.alpha * rep.alpha;
  return rep;
}

}  // namespace ecx
