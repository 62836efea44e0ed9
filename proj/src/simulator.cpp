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

#include "ecx/simulator.hpp"

#include <cmath>
#include <future>
#include <limits>
#include <utility>

#include "ecx/rng.hpp"

namespace ecx {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t role) {
  // splitmix64 finaliser over a simple combination.
  std::uint64_t z = a ^ (b * 0x9e3779b97f4a7c15ULL) ^ (role << 56);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool all_finite(const DenseVector& v) { return v.allFinite(); }

}  // namespace

std::string to_string(Topology t) {
  switch (t) {
    case Topology::kDoubleCompression: return "double";
    case Topology::kSingleRound: return "single_round";
    case Topology::kSingleWorker: return "single_worker";
  }
  return "?";
}

Topology topology_from_string(const std::string& name) {
  for (auto t : {Topology::kDoubleCompression, Topology::kSingleRound,
                 Topology::kSingleWorker}) {
    if (to_string(t) == name) return t;
  }
  throw ConfigError("unknown topology '" + name + "'");
}

void RunConfig::validate() const {
  problem.validate();
  require(workers >= 1, "run: workers must be >= 1");
  require(steps >= 1, "run: steps must be >= 1");
  require(std::isfinite(gamma) && gamma >= 0.0, "run: gamma must be >= 0");
  require(initial_batch >= 1, "run: initial batch B0 must be >= 1");
  schedule.validate();
  scheme.validate();
  require(topology != Topology::kSingleWorker || workers == 1,
          "run: single_worker topology needs exactly one worker");
  require(heterogeneity >= 0.0 && heterogeneity <= 1.0,
          "run: heterogeneity must lie in [0, 1]");
}

DivergenceError::DivergenceError(std::int64_t step, RunTrace partial)
    : std::runtime_error("run diverged at step " + std::to_string(step)),
      step_(step),
      partial_(std::move(partial)) {}

RunContext make_context(const RunConfig& config) {
  config.validate();
  Problem problem(config.problem);
  auto shards = partition_data(problem, config.workers,
                               mix_seed(config.seed, 0, 3),
                               config.heterogeneity);
  DenseVector x0 = DenseVector::Zero(problem.dim());
  if (!config.x0.empty()) {
    require(static_cast<Eigen::Index>(config.x0.size()) == problem.dim(),
            "run: x0 has " + std::to_string(config.x0.size()) +
                " entries, problem dimension is " +
                std::to_string(problem.dim()));
    x0 = Eigen::Map<const DenseVector>(config.x0.data(), problem.dim());
  }
  return {std::move(problem), std::move(shards), std::move(x0),
          mix_seed(config.seed, 0, 4)};
}

DenseVector ordered_mean(const std::vector<DenseVector>& parts) {
  require(!parts.empty(), "ordered_mean: nothing to average");
  DenseVector sum = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) sum += parts[i];
  return sum / static_cast<double>(parts.size());
}

Simulator::Simulator(RunConfig config)
    : Simulator(config, make_context(config)) {}

Simulator::Simulator(RunConfig config, RunContext context)
    : config_(std::move(config)), ctx_(std::move(context)) {
  config_.validate();
  const auto d = ctx_.problem.dim();
  worker_spec_ = config_.worker_compressor;
  server_spec_ = config_.server_compressor;
  worker_spec_.seed = mix_seed(config_.seed, worker_spec_.seed, 1);
  server_spec_.seed = mix_seed(config_.seed, server_spec_.seed, 2);
  const auto n = static_cast<std::uint64_t>(config_.workers);
  const std::uint64_t dense = 64ULL * static_cast<std::uint64_t>(d);
  if (config_.uncompressed) {
    bits_per_step_ = 2 * n * dense;
  } else {
    worker_spec_.validate(d);
    std::uint64_t down = dense;
    if (config_.topology == Topology::kDoubleCompression) {
      server_spec_.validate(d);
      down = message_bits(server_spec_, d);
    } else if (config_.topology == Topology::kSingleWorker) {
      down = 0;
    }
    bits_per_step_ = n * (message_bits(worker_spec_, d) + down);
  }
}

std::vector<DenseVector> Simulator::worker_inputs(std::int64_t t) {
  const auto n = workers_.size();
  const double a = EstimatorState{config_.estimator, config_.schedule, {}, {}}
                       .alpha_at(t);
  auto one = [&, t](std::size_t i) {
    const Worker& w = workers_[i];
    const Shard& shard = ctx_.shards[i];
    const SampleHandle h = run_handle(t, static_cast<std::int64_t>(i));
    PinnedGradient grad = [&](const DenseVector& p) {
      return ctx_.problem.stoch_grad(shard, p, h, ctx_.sampling_seed);
    };
    return eval_A(config_.estimator, w.x, w.x_prev, a, grad);
  };
  std::vector<DenseVector> out(n);
  if (config_.parallel && n > 1) {
    std::vector<std::future<DenseVector>> jobs;
    jobs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      jobs.push_back(std::async(std::launch::async, one, i));
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = one(i);
  }
  return out;
}

void Simulator::init() {
  const auto d = ctx_.problem.dim();
  const auto n = config_.workers;
  workers_.assign(static_cast<std::size_t>(n), Worker{});
  server_ = CompensationState::zeros(d);
  cum_bits_ = 0;
  const BatchGradient grad = [&](std::int64_t i, std::int64_t b) {
    return ctx_.problem.stoch_grad(ctx_.shards[static_cast<std::size_t>(i)],
                                   ctx_.x0, run_handle(0, i),
                                   ctx_.sampling_seed, b);
  };
  const DenseVector v0 = init_v0(d, config_.initial_batch, n, grad);
  for (auto& w : workers_) {
    w.comp = CompensationState::zeros(d);
    w.x = ctx_.x0;
    w.v = v0;
    w.x_prev = ctx_.x0;
  }
}

void Simulator::record_metrics(std::int64_t t, double worker_delta,
                               double server_delta, RunTrace& trace) const {
  const Worker& w = workers_.front();
  StepMetrics m;
  m.step = t;
  m.loss = ctx_.problem.loss(w.x);
  m.grad_norm_sq = ctx_.problem.full_grad(w.x).squaredNorm();
  m.v_norm = w.v.norm();
  m.worker_delta_norm = worker_delta;
  m.server_delta_norm = server_delta;
  m.cum_bits = cum_bits_;
  trace.metrics.push_back(m);
}

void Simulator::check_replicas() const {
  const Worker& ref = workers_.front();
  for (std::size_t i = 1; i < workers_.size(); ++i) {
    if (!(workers_[i].x.array() == ref.x.array()).all() ||
        !(workers_[i].v.array() == ref.v.array()).all()) {
      throw ReplicaMismatch("worker " + std::to_string(i) +
                            " replica differs from worker 0");
    }
  }
}

bool Simulator::diverged() const {
  const Worker& w = workers_.front();
  return !all_finite(w.x) || !all_finite(w.v) || w.x.norm() > kDivergenceNorm;
}

void Simulator::step(std::int64_t t, RunTrace& trace) {
  const std::size_t n = workers_.size();
  const auto d = ctx_.problem.dim();
  EstimatorState probe{config_.estimator, config_.schedule, {}, {}};
  const AlphaWindow win{probe.alpha_at(t), probe.alpha_at(t - 1),
                        probe.alpha_at(t - 2)};
  const double a = win.now;
  const std::vector<DenseVector> inputs = worker_inputs(t);

  StepRecord rec;
  if (config_.record) {
    rec.alpha = a;
    rec.a_bar = ordered_mean(inputs);
    rec.x = workers_.front().x;
  }

  DenseVector broadcast;
  double worker_delta = 0.0;
  double server_delta = 0.0;
  const bool estimator_level =
      !config_.uncompressed &&
      config_.scheme.kind != SchemeKind::kErrorCompensatedX &&
      config_.baseline_target == BaselineTarget::kEstimator;

  if (config_.uncompressed) {
    broadcast = ordered_mean(inputs);
    if (config_.record) {
      rec.delta_bar = DenseVector::Zero(d);
      rec.e_bar = DenseVector::Zero(d);
    }
  } else {
    std::vector<DenseVector> messages(n);
    std::vector<DenseVector> deltas(n);
    std::vector<DenseVector> errors(n);
    for (std::size_t i = 0; i < n; ++i) {
      Worker& w = workers_[i];
      const DenseVector& e =
          filter_update(w.comp, config_.scheme.beta, win, config_.scheme.kind);
      const DenseVector payload =
          estimator_level ? moving_average(w.v, inputs[i], a) : inputs[i];
      CompressionResult r = compress(compensate(payload, e), worker_spec_,
                                     static_cast<std::uint64_t>(t),
                                     static_cast<std::uint32_t>(i));
      shift_deltas(w.comp, r.residual);
      worker_delta = std::max(worker_delta, r.residual.norm());
      if (config_.record) {
        errors[i] = e;
        deltas[i] = r.residual;
      }
      messages[i] = std::move(r.compressed);
    }
    const DenseVector average = ordered_mean(messages);
    DenseVector server_e = DenseVector::Zero(d);
    DenseVector server_d = DenseVector::Zero(d);
    if (config_.topology == Topology::kDoubleCompression) {
      server_e =
          filter_update(server_, config_.scheme.beta, win, config_.scheme.kind);
      CompressionResult r =
          compress(compensate(average, server_e), server_spec_,
                   static_cast<std::uint64_t>(t), static_cast<std::uint32_t>(n));
      shift_deltas(server_, r.residual);
      server_delta = r.residual.norm();
      server_d = r.residual;
      broadcast = std::move(r.compressed);
    } else {
      broadcast = average;
    }
    if (config_.record) {
      rec.delta_bar = server_d + ordered_mean(deltas);
      rec.e_bar = server_e + ordered_mean(errors);
    }
  }

  for (auto& w : workers_) {
    w.v = estimator_level ? broadcast : moving_average(w.v, broadcast, a);
  }
  cum_bits_ += bits_per_step_;
  record_metrics(t, worker_delta, server_delta, trace);
  if (config_.record) {
    rec.v = workers_.front().v;
    trace.records.push_back(std::move(rec));
  }
  for (auto& w : workers_) {
    w.x_prev = w.x;
    w.x = w.x - config_.gamma * w.v;
  }
  check_replicas();
}

RunTrace Simulator::run() {
  init();
  RunTrace trace;
  trace.x0 = ctx_.x0;
  const auto d = ctx_.problem.dim();
  record_metrics(0, 0.0, 0.0, trace);
  if (config_.record) {
    StepRecord rec;
    rec.alpha = EstimatorState{config_.estimator, config_.schedule, {}, {}}
                    .alpha_at(0);
    rec.a_bar = workers_.front().v;
    rec.delta_bar = DenseVector::Zero(d);
    rec.e_bar = DenseVector::Zero(d);
    rec.v = workers_.front().v;
    rec.x = workers_.front().x;
    trace.records.push_back(std::move(rec));
  }
  for (auto& w : workers_) {
    w.x_prev = w.x;
    w.x = w.x - config_.gamma * w.v;
  }
  auto finish = [&](std::int64_t executed) {
    const DenseVector& x = workers_.front().x;
    trace.final_x = x;
    trace.steps_executed = executed;
    if (x.allFinite()) {
      trace.final_loss = ctx_.problem.loss(x);
      trace.final_grad_norm_sq = ctx_.problem.full_grad(x).squaredNorm();
    } else {
      trace.final_loss = std::numeric_limits<double>::quiet_NaN();
      trace.final_grad_norm_sq = std::numeric_limits<double>::quiet_NaN();
    }
  };
  if (diverged()) {
    finish(1);
    throw DivergenceError(0, std::move(trace));
  }
  for (std::int64_t t = 1; t < config_.steps; ++t) {
    step(t, trace);
    if (diverged()) {
      finish(t + 1);
      throw DivergenceError(t, std::move(trace));
    }
  }
  finish(config_.steps);
  return trace;
}

RunTrace run(const RunConfig& config) { return Simulator(config).run(); }

}  // namespace ecx
