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

#include "ecx/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "ecx/metrics_csv.hpp"
#include "ecx/oracle.hpp"

namespace ecx {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) { return format_double(v); }

void finish_outcome(VariantOutcome& o) {
  const double g2 = o.trace.final_grad_norm_sq;
  o.final_grad_norm = o.diverged || !std::isfinite(g2) ? kNaN : std::sqrt(g2);
  o.log10_grad_norm = std::log10(o.final_grad_norm);
}

// Smaller is better; NaN (diverged) loses to everything.
bool better(double a, double b) {
  if (std::isnan(a)) return false;
  if (std::isnan(b)) return true;
  return a < b;
}

std::string reference_label(const ExperimentConfig& cfg) {
  if (!cfg.tune.reference.empty()) return cfg.tune.reference;
  for (const auto& v : cfg.variants) {
    if (v.run.uncompressed) return v.label;
  }
  return cfg.variants.empty() ? std::string("base") : cfg.variants.front().label;
}

std::vector<Variant> variants_of(const ExperimentConfig& cfg) {
  if (!cfg.variants.empty()) return cfg.variants;
  Variant v;
  v.label = "base";
  v.run = cfg.base;
  return {v};
}

}  // namespace

VariantOutcome run_variant(const std::string& label, const RunConfig& run,
                           bool record_ghost) {
  VariantOutcome o;
  o.label = label;
  o.run = run;
  o.run.record = run.record || record_ghost;
  o.expected_divergence =
      !run.uncompressed && run.scheme.kind == SchemeKind::kNoCompensation;
  try {
    o.trace = ecx::run(o.run);
  } catch (const DivergenceError& e) {
    o.diverged = true;
    o.divergence_step = e.step();
    o.trace = e.partial();
  }
  if (record_ghost && !o.trace.records.empty()) {
    const GhostTrace g = ghost_run(o.trace, run.gamma);
    o.trace.ghost_residual_norms.clear();
    for (std::size_t t = 0; t < o.trace.metrics.size() && t < g.residual.size();
         ++t) {
      o.trace.ghost_residual_norms.push_back(g.residual[t].norm());
    }
  }
  if (!run.record) o.trace.records.clear();
  finish_outcome(o);
  return o;
}

bool CompareSummary::unexpected_divergence() const {
  for (const auto& v : variants) {
    if (v.diverged && !v.expected_divergence) return true;
  }
  return false;
}

const VariantOutcome& CompareSummary::variant(const std::string& label) const {
  for (const auto& v : variants) {
    if (v.label == label) return v;
  }
  throw ConfigError("no variant labelled '" + label + "'");
}

CompareSummary compare(const ExperimentConfig& cfg, bool tune,
                       bool record_ghost) {
  CompareSummary s;
  const auto variants = variants_of(cfg);
  s.reference = reference_label(cfg);
  const Variant* ref = nullptr;
  for (const auto& v : variants) {
    if (v.label == s.reference) ref = &v;
  }
  if (ref == nullptr) ref = &variants.front();
  s.reference = ref->label;
  s.gamma = ref->run.gamma;

  if (tune) {
    require(!cfg.tune.gammas.empty(), "compare: tuning needs a gamma grid");
    double best = kNaN;
    for (double g : cfg.tune.gammas) {
      RunConfig r = ref->run;
      r.gamma = g;
      const VariantOutcome o = run_variant(ref->label, r, false);
      s.tuning.push_back({g, o.final_grad_norm, o.diverged});
      if (better(o.final_grad_norm, best)) {
        best = o.final_grad_norm;
        s.gamma = g;
      }
    }
  }

  for (const auto& v : variants) {
    RunConfig r = v.run;
    if (tune) r.gamma = s.gamma;
    s.variants.push_back(run_variant(v.label, r, record_ghost));
  }
  const double ref_log = s.variant(s.reference).log10_grad_norm;
  for (auto& v : s.variants) v.log10_gap = v.log10_grad_norm - ref_log;
  return s;
}

CompareSummary benchmark_experiment(const ExperimentConfig& cfg) {
  for (const auto& v : variants_of(cfg)) {
    const auto est = v.run.estimator;
    require(est == EstimatorKind::kStorm || est == EstimatorKind::kRootSgd ||
                est == EstimatorKind::kIgt,
            "benchmark: variant '" + v.label + "' must use STORM or IGT");
    const auto sk = v.run.schedule.kind;
    require(sk == ScheduleKind::kInverseT || sk == ScheduleKind::kInverseLinear,
            "benchmark: variant '" + v.label +
                "' must use the 1/t or 1/(1 + c0 t) schedule");
  }
  return compare(cfg, true, false);
}

void write_compare_outputs(const CompareSummary& s,
                           const ExperimentConfig& cfg,
                           const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (const auto& v : s.variants) {
    write_metrics_csv(v.trace, out_dir + "/" + v.label + ".csv");
  }
  std::ofstream out(out_dir + "/summary.txt", std::ios::binary);
  if (!out) throw ConfigError("cannot write " + out_dir + "/summary.txt");
  out << "experiment=" << cfg.name << '\n';
  out << "reference=" << s.reference << '\n';
  out << "gamma=" << fmt(s.gamma) << '\n';
  for (const auto& t : s.tuning) {
    out << "tune.gamma." << fmt(t.gamma) << ".final_grad_norm="
        << fmt(t.final_grad_norm) << (t.diverged ? " diverged" : "") << '\n';
  }
  for (const auto& v : s.variants) {
    const std::string p = "variant." + v.label + ".";
    out << p << "final_grad_norm=" << fmt(v.final_grad_norm) << '\n';
    out << p << "log10_grad_norm=" << fmt(v.log10_grad_norm) << '\n';
    out << p << "log10_gap=" << fmt(v.log10_gap) << '\n';
    out << p << "steps=" << v.trace.steps_executed << '\n';
    out << p << "diverged=" << (v.diverged ? "true" : "false") << '\n';
    if (v.diverged) {
      out << p << "divergence_step=" << v.divergence_step << '\n';
      out << p << "divergence="
          << (v.expected_divergence ? "expected" : "unexpected") << '\n';
    }
  }
}

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const VerifyCheck& c) { return c.passed; });
}

std::string VerifyReport::to_text() const {
  std::ostringstream out;
  for (const auto& c : checks) {
    out << "check." << c.name << '=' << (c.passed ? "PASS" : "FAIL");
    if (!c.detail.empty()) out << ' ' << c.detail;
    out << '\n';
  }
  out << "c2_sign=" << c2_sign << '\n';
  out << "ecx_residual_convention=" << ecx_convention << '\n';
  out << "result=" << (passed() ? "PASS" : "FAIL") << '\n';
  return out.str();
}

namespace {

RunConfig verify_base(const VerifySpec& spec) {
  RunConfig r;
  r.problem.kind = ProblemKind::kLinReg;
  r.problem.dim = spec.dim;
  r.problem.samples = 256;
  r.problem.condition = 10.0;
  r.problem.label_noise = 0.1;
  r.problem.batch_size = 1;
  r.problem.seed = spec.seed;
  r.seed = spec.seed;
  r.steps = spec.steps;
  r.gamma = 0.05;
  r.estimator = EstimatorKind::kMomentum;
  r.scheme.beta = 1.0;
  r.worker_compressor = CompressorSpec::one_bit();
  r.server_compressor = CompressorSpec::one_bit();
  return r;
}

bool same_x(const RunTrace& a, const RunTrace& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t t = 0; t < a.records.size(); ++t) {
    if (!(a.records[t].x.array() == b.records[t].x.array()).all()) return false;
  }
  return (a.final_x.array() == b.final_x.array()).all();
}

}  // namespace

VerifyReport verify_suite(const VerifySpec& spec) {
  VerifyReport rep;
  const RunConfig base = verify_base(spec);

  // Closed-form residual identity.
  std::set<std::string> signs;
  std::set<std::string> conventions;
  double worst = 0.0;
  int failures = 0;
  int cases = 0;
  std::string first_failure;
  for (const auto& comp :
       {CompressorSpec::one_bit(), CompressorSpec::top_k(std::max<std::int64_t>(1, spec.dim / 3))}) {
    for (std::int64_t n : {1, 4}) {
      for (double a : {0.1, 0.5, 1.0}) {
        for (auto kind : {SchemeKind::kNoCompensation, SchemeKind::kSingle,
                          SchemeKind::kErrorCompensatedX}) {
          RunConfig r = base;
          r.workers = n;
          r.initial_batch = n;
          r.schedule = AlphaSchedule::constant(a);
          r.worker_compressor = comp;
          r.server_compressor = comp;
          r.scheme.kind = kind;
          r.record = true;
          ++cases;
          const std::string label = to_string(comp.kind) + "/n" +
                                     std::to_string(n) + "/a" + fmt(a) + "/" +
                                     to_string(kind);
          try {
            const RunTrace tr = ecx::run(r);
            const auto id = verify_residual_identity(r, tr, spec.tolerance);
            if (id.resolved_sign != "either") signs.insert(id.resolved_sign);
            if (id.ecx_convention != "n/a") conventions.insert(id.ecx_convention);
            worst = std::max(worst, std::min(id.max_rel_error_minus,
                                             id.max_rel_error_plus));
          } catch (const std::exception& e) {
            ++failures;
            if (first_failure.empty()) first_failure = label + ": " + e.what();
          }
        }
      }
    }
  }
  rep.c2_sign = signs.empty() ? "either"
                : signs.size() == 1 ? *signs.begin()
                                    : "inconsistent";
  rep.ecx_convention = conventions.size() == 1 ? *conventions.begin()
                       : conventions.empty()   ? "n/a"
                                               : "inconsistent";
  {
    VerifyCheck c{"residual_identity", failures == 0 && rep.c2_sign != "inconsistent", ""};
    c.detail = "cases=" + std::to_string(cases) +
               " failures=" + std::to_string(failures) +
               " max_rel_error=" + fmt(worst);
    if (!first_failure.empty()) c.detail += " first_failure=\"" + first_failure + "\"";
    rep.checks.push_back(c);
  }

  // Identity compressor: ghost and compressed trajectories coincide.
  {
    bool ok = true;
    std::string detail;
    auto probe = [&](SchemeKind kind, std::int64_t n, bool uncompressed) {
      RunConfig r = base;
      r.workers = n;
      r.initial_batch = n;
      r.schedule = AlphaSchedule::constant(0.3);
      r.scheme = {kind, 0.3};
      r.worker_compressor = CompressorSpec::identity();
      r.server_compressor = CompressorSpec::identity();
      r.uncompressed = uncompressed;
      r.record = true;
      const RunTrace tr = ecx::run(r);
      const GhostTrace g = ghost_run(tr, r.gamma);
      double m = 0.0;
      for (const auto& res : g.residual) m = std::max(m, res.lpNorm<Eigen::Infinity>());
      if (m != 0.0) {
        ok = false;
        detail += to_string(kind) + "/n" + std::to_string(n) + " max=" + fmt(m) + " ";
      }
    };
    for (auto kind : {SchemeKind::kNoCompensation, SchemeKind::kSingle,
                      SchemeKind::kErrorCompensatedX}) {
      probe(kind, 1, false);
    }
    probe(SchemeKind::kErrorCompensatedX, 4, false);
    probe(SchemeKind::kErrorCompensatedX, 4, true);
    rep.checks.push_back({"identity_ghost_zero", ok, detail});
  }

  // alpha = 1: ErrorCompensatedX and single compensation coincide.
  {
    RunConfig r = base;
    r.workers = 4;
    r.initial_batch = 4;
    r.schedule = AlphaSchedule::constant(1.0);
    r.scheme.beta = 0.3;
    r.record = true;
    r.scheme.kind = SchemeKind::kErrorCompensatedX;
    const RunTrace ecx_tr = ecx::run(r);
    r.scheme.kind = SchemeKind::kSingle;
    const RunTrace single_tr = ecx::run(r);
    rep.checks.push_back({"alpha_one_collapse", same_x(ecx_tr, single_tr),
                          "compared=x_t bitwise"});
  }

  // Aggregated update.
  {
    RunConfig r = base;
    r.workers = 4;
    r.initial_batch = 4;
    r.schedule = AlphaSchedule::constant(0.2);
    r.scheme = {SchemeKind::kErrorCompensatedX, 0.3};
    r.record = true;
    const RunTrace tr = ecx::run(r);
    const double err = aggregated_update_error(r, tr);
    rep.checks.push_back({"aggregated_update", err <= 1e-12,
                          "max_rel_error=" + fmt(err)});
  }

  // Residual ordering ecx < single < none.
  {
    RunConfig r = base;
    r.problem.dim = 20;
    r.problem.samples = 512;
    r.workers = 4;
    r.initial_batch = 4;
    r.steps = 2000;
    r.gamma = 1e-3;
    r.schedule = AlphaSchedule::constant(0.05);
    r.scheme.beta = 0.3;
    const ResidualSumReport s = residual_sum_comparison(r);
    std::string detail = "eps_hat=" + fmt(s.eps_hat);
    for (const auto& x : s.schemes) {
      detail += " " + to_string(x.scheme) + "=" + fmt(x.sum_sq);
    }
    rep.checks.push_back({"residual_ordering", s.ordering_holds, detail});
  }
  return rep;
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& cfg,
                                 const std::string& out_dir, bool record_ghost,
                                 unsigned threads) {
  std::filesystem::create_directories(out_dir);
  std::vector<double> gammas = cfg.sweep.gammas;
  if (gammas.empty()) gammas.push_back(cfg.base.gamma);
  const bool by_alpha = !cfg.sweep.alphas.empty();
  const bool by_c0 = !cfg.sweep.c0s.empty();
  const std::vector<double> params =
      by_alpha ? cfg.sweep.alphas : (by_c0 ? cfg.sweep.c0s : std::vector<double>{0.0});

  std::vector<SweepCell> cells;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    for (std::size_t j = 0; j < params.size(); ++j) {
      SweepCell c;
      c.gamma = gammas[i];
      c.param = params[j];
      c.file = "cell-" + std::to_string(i) + "-" + std::to_string(j) + ".csv";
      cells.push_back(std::move(c));
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= cells.size()) return;
      try {
        SweepCell& c = cells[k];
        RunConfig r = cfg.base;
        r.gamma = c.gamma;
        if (by_alpha) r.schedule = AlphaSchedule::constant(c.param);
        if (by_c0) r.schedule = AlphaSchedule::inverse_linear(c.param);
        c.outcome = run_variant(c.file, r, record_ghost);
        write_metrics_csv(c.outcome.trace, out_dir + "/" + c.file);
        c.outcome.trace.metrics.clear();
        c.outcome.trace.ghost_residual_norms.clear();
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cells.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  std::ofstream out(out_dir + "/summary.txt", std::ios::binary);
  if (!out) throw ConfigError("cannot write " + out_dir + "/summary.txt");
  out << "experiment=" << cfg.name << '\n';
  out << "param=" << (by_alpha ? "alpha" : by_c0 ? "c0" : "none") << '\n';
  for (const auto& c : cells) {
    const std::string p = "cell." + c.file + ".";
    out << p << "gamma=" << fmt(c.gamma) << '\n';
    out << p << "param=" << fmt(c.param) << '\n';
    out << p << "final_grad_norm=" << fmt(c.outcome.final_grad_norm) << '\n';
    out << p << "diverged=" << (c.outcome.diverged ? "true" : "false") << '\n';
  }
  return cells;
}

}  // namespace ecx
