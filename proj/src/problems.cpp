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

#include "ecx/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ecx/rng.hpp"

namespace ecx {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kQuadratic: return "quadratic";
    case ProblemKind::kLinReg: return "linreg";
    case ProblemKind::kLogReg: return "logreg";
  }
  return "?";
}

ProblemKind problem_kind_from_string(const std::string& name) {
  for (auto k : {ProblemKind::kQuadratic, ProblemKind::kLinReg,
                 ProblemKind::kLogReg}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown problem kind '" + name + "'");
}

void ProblemSpec::validate() const {
  require(batch_size >= 1, "problem: batch_size must be >= 1");
  if (kind == ProblemKind::kQuadratic) {
    require(!spectrum.empty(), "problem: quadratic needs a spectrum");
    for (double s : spectrum) {
      require(std::isfinite(s) && s >= 0.0,
              "problem: quadratic eigenvalues must be >= 0");
    }
    require(grad_noise >= 0.0, "problem: grad_noise must be >= 0");
    return;
  }
  require(dim >= 1, "problem: dim must be >= 1");
  require(samples >= 1, "problem: samples must be >= 1");
  require(condition >= 1.0, "problem: condition must be >= 1");
  require(label_noise >= 0.0, "problem: label_noise must be >= 0");
  require(regularizer >= 0.0, "problem: regularizer must be >= 0");
}

Problem::Problem(ProblemSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  generate();
}

Problem::Problem(ProblemKind kind, DenseMatrix features, DenseVector targets,
                 double regularizer, std::int64_t batch_size,
                 std::uint64_t seed) {
  require(kind != ProblemKind::kQuadratic,
          "problem: explicit datasets need a regression kind");
  require(features.rows() >= 1, "problem: dataset has no rows");
  require(features.rows() == targets.size(),
          "problem: feature rows and targets differ in length");
  spec_.kind = kind;
  spec_.dim = features.cols();
  spec_.samples = features.rows();
  spec_.regularizer = regularizer;
  spec_.batch_size = batch_size;
  spec_.seed = seed;
  spec_.label_noise = 0.0;
  spec_.validate();
  dim_ = features.cols();
  features_ = std::move(features);
  targets_ = std::move(targets);
  truth_ = DenseVector::Zero(dim_);
}

void Problem::generate() {
  if (spec_.kind == ProblemKind::kQuadratic) {
    dim_ = static_cast<Eigen::Index>(spec_.spectrum.size());
    spectrum_ = Eigen::Map<const DenseVector>(spec_.spectrum.data(), dim_);
    truth_ = DenseVector::Zero(dim_);
    return;
  }
  dim_ = spec_.dim;
  const Eigen::Index n = spec_.samples;
  DenseVector scale(dim_);
  for (Eigen::Index j = 0; j < dim_; ++j) {
    const double frac =
        dim_ == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(dim_ - 1);
    scale[j] = std::sqrt(std::pow(spec_.condition, -frac));
  }
  KeyedRng design(spec_.seed, Stream::kDataset, 0, 0, 0);
  features_.resize(n, dim_);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dim_; ++j) {
      features_(i, j) = design.normal() * scale[j];
    }
  }
  KeyedRng param(spec_.seed, Stream::kDataset, 0, 0, 1);
  truth_.resize(dim_);
  for (Eigen::Index j = 0; j < dim_; ++j) truth_[j] = param.normal();

  KeyedRng noise(spec_.seed, Stream::kDataset, 0, 0, 2);
  const DenseVector margin = features_ * truth_;
  targets_.resize(n);
  if (spec_.kind == ProblemKind::kLinReg) {
    for (Eigen::Index i = 0; i < n; ++i) {
      targets_[i] = margin[i] + spec_.label_noise * noise.normal();
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      targets_[i] = noise.uniform() < sigmoid(margin[i]) ? 1.0 : -1.0;
    }
  }
}

double Problem::loss(const DenseVector& x) const {
  require(x.size() == dim_, "loss: dimension mismatch");
  switch (spec_.kind) {
    case ProblemKind::kQuadratic:
      return 0.5 * spectrum_.dot(x.cwiseProduct(x));
    case ProblemKind::kLinReg: {
      const DenseVector r = features_ * x - targets_;
      return 0.5 * r.squaredNorm() / static_cast<double>(features_.rows());
    }
    case ProblemKind::kLogReg: {
      const DenseVector m = features_ * x;
      double total = 0.0;
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        total += softplus(-targets_[i] * m[i]);
      }
      return total / static_cast<double>(m.size()) +
             0.5 * spec_.regularizer * x.squaredNorm();
    }
  }
  return 0.0;
}

DenseVector Problem::full_grad(const DenseVector& x) const {
  require(x.size() == dim_, "full_grad: dimension mismatch");
  switch (spec_.kind) {
    case ProblemKind::kQuadratic:
      return spectrum_.cwiseProduct(x);
    case ProblemKind::kLinReg: {
      const DenseVector r = features_ * x - targets_;
      return features_.transpose() * r / static_cast<double>(features_.rows());
    }
    case ProblemKind::kLogReg: {
      const DenseVector m = features_ * x;
      DenseVector w(m.size());
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        w[i] = -targets_[i] * sigmoid(-targets_[i] * m[i]);
      }
      return features_.transpose() * w / static_cast<double>(m.size()) +
             spec_.regularizer * x;
    }
  }
  return DenseVector::Zero(dim_);
}

DenseVector Problem::rows_grad(std::span<const std::int64_t> rows,
                               const DenseVector& x) const {
  DenseVector g = DenseVector::Zero(dim_);
  for (std::int64_t r : rows) {
    const auto row = features_.row(r);
    const double m = row.dot(x);
    if (spec_.kind == ProblemKind::kLinReg) {
      g += (m - targets_[r]) * row.transpose();
    } else {
      g += (-targets_[r] * sigmoid(-targets_[r] * m)) * row.transpose();
    }
  }
  g /= static_cast<double>(rows.size());
  if (spec_.kind == ProblemKind::kLogReg) g += spec_.regularizer * x;
  return g;
}

DenseVector Problem::shard_grad(const Shard& shard,
                                const DenseVector& x) const {
  require(x.size() == dim_, "shard_grad: dimension mismatch");
  if (shard.population || spec_.kind == ProblemKind::kQuadratic) {
    return full_grad(x);
  }
  require(!shard.indices.empty(), "shard_grad: empty shard");
  return rows_grad(shard.indices, x);
}

std::int64_t Problem::effective_batch(std::int64_t batch) const {
  return batch > 0 ? batch : spec_.batch_size;
}

std::vector<std::int64_t> Problem::minibatch_indices(
    const Shard& shard, const SampleHandle& handle,
    std::uint64_t sampling_seed, std::int64_t batch) const {
  if (shard.population || spec_.kind == ProblemKind::kQuadratic) return {};
  require(!shard.indices.empty(), "stoch_grad: empty shard");
  const std::int64_t b = effective_batch(batch);
  // A batch the size of the shard is the shard itself.
  if (b == static_cast<std::int64_t>(shard.indices.size())) return shard.indices;
  KeyedRng rng(sampling_seed, Stream::kSampling, handle.step, handle.worker,
               handle.lane);
  std::vector<std::int64_t> out(static_cast<std::size_t>(b));
  const auto size = static_cast<std::uint64_t>(shard.indices.size());
  for (auto& idx : out) idx = shard.indices[rng.below(size)];
  return out;
}

DenseVector Problem::stoch_grad(const Shard& shard, const DenseVector& x,
                                const SampleHandle& handle,
                                std::uint64_t sampling_seed,
                                std::int64_t batch) const {
  require(x.size() == dim_, "stoch_grad: dimension mismatch");
  if (shard.population || spec_.kind == ProblemKind::kQuadratic) {
    DenseVector g = full_grad(x);
    if (spec_.grad_noise == 0.0) return g;
    const std::int64_t b = effective_batch(batch);
    KeyedRng rng(sampling_seed, Stream::kSampling, handle.step, handle.worker,
                 handle.lane);
    DenseVector noise = DenseVector::Zero(dim_);
    for (std::int64_t k = 0; k < b; ++k) {
      for (Eigen::Index j = 0; j < dim_; ++j) noise[j] += rng.normal();
    }
    return g + (spec_.grad_noise / static_cast<double>(b)) * noise;
  }
  const auto rows = minibatch_indices(shard, handle, sampling_seed, batch);
  return rows_grad(rows, x);
}

double Problem::smoothness_L() const {
  switch (spec_.kind) {
    case ProblemKind::kQuadratic:
      return spectrum_.maxCoeff();
    case ProblemKind::kLinReg: {
      const DenseMatrix h = features_.transpose() * features_ /
                            static_cast<double>(features_.rows());
      Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h, Eigen::EigenvaluesOnly);
      return std::max(0.0, es.eigenvalues().maxCoeff());
    }
    case ProblemKind::kLogReg: {
      Eigen::JacobiSVD<DenseMatrix> svd(features_);
      const double op = svd.singularValues()[0];
      return op * op / (4.0 * static_cast<double>(features_.rows())) +
             spec_.regularizer;
    }
  }
  return 0.0;
}

double Problem::smoothness_LF() const {
  if (spec_.kind == ProblemKind::kQuadratic) return spectrum_.maxCoeff();
  const double row_max = features_.rowwise().squaredNorm().maxCoeff();
  if (spec_.kind == ProblemKind::kLinReg) return row_max;
  return row_max / 4.0 + spec_.regularizer;
}

std::optional<DenseVector> Problem::minimizer() const {
  switch (spec_.kind) {
    case ProblemKind::kQuadratic:
      return DenseVector::Zero(dim_);
    case ProblemKind::kLinReg: {
      Eigen::ColPivHouseholderQR<DenseMatrix> qr(features_);
      if (qr.rank() < dim_) return std::nullopt;
      return DenseVector(qr.solve(targets_));
    }
    case ProblemKind::kLogReg:
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<double> Problem::optimal_value() const {
  const auto xs = minimizer();
  if (!xs) return std::nullopt;
  return loss(*xs);
}

std::vector<Shard> partition_data(const Problem& problem, std::int64_t n,
                                  std::uint64_t seed, double heterogeneity) {
  require(n >= 1, "partition_data: n must be >= 1");
  require(heterogeneity >= 0.0 && heterogeneity <= 1.0,
          "partition_data: heterogeneity must lie in [0, 1]");
  if (problem.kind() == ProblemKind::kQuadratic) {
    std::vector<Shard> shards(static_cast<std::size_t>(n));
    for (auto& s : shards) s.population = true;
    return shards;
  }
  const std::int64_t total = problem.sample_count();
  if (n > total) {
    throw ConfigError("partition_data: " + std::to_string(n) +
                      " workers for " + std::to_string(total) + " samples");
  }
  const DenseVector& y = problem.targets();
  std::vector<std::int64_t> by_target(static_cast<std::size_t>(total));
  std::iota(by_target.begin(), by_target.end(), 0);
  std::stable_sort(by_target.begin(), by_target.end(),
                   [&](std::int64_t a, std::int64_t b) { return y[a] < y[b]; });
  std::vector<double> rank(static_cast<std::size_t>(total));
  for (std::int64_t r = 0; r < total; ++r) {
    rank[static_cast<std::size_t>(by_target[r])] =
        static_cast<double>(r) / static_cast<double>(total);
  }
  KeyedRng rng(seed, Stream::kPartition, 0, 0, 0);
  std::vector<double> key(static_cast<std::size_t>(total));
  for (std::int64_t i = 0; i < total; ++i) {
    const double u = rng.uniform();
    key[i] = heterogeneity * rank[i] + (1.0 - heterogeneity) * u;
  }
  std::vector<std::int64_t> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int64_t a, std::int64_t b) { return key[a] < key[b]; });

  std::vector<Shard> shards(static_cast<std::size_t>(n));
  const std::int64_t base = total / n;
  const std::int64_t extra = total % n;
  std::int64_t pos = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t len = base + (i < extra ? 1 : 0);
    auto& idx = shards[static_cast<std::size_t>(i)].indices;
    idx.assign(order.begin() + pos, order.begin() + pos + len);
    std::sort(idx.begin(), idx.end());
    pos += len;
  }
  return shards;
}

double variance_sigma2(const Problem& problem, const Shard& shard,
                       const DenseVector& x, std::int64_t trials,
                       std::uint64_t seed, std::int64_t batch) {
  require(trials >= 2, "variance_sigma2: need at least two trials");
  const DenseVector mean = problem.shard_grad(shard, x);
  double total = 0.0;
  for (std::int64_t k = 0; k < trials; ++k) {
    const SampleHandle h{static_cast<std::uint64_t>(k), 0, kDiagnosticLane};
    total += (problem.stoch_grad(shard, x, h, seed, batch) - mean).squaredNorm();
  }
  return total / static_cast<double>(trials);
}

double power_iteration_max_eig(const DenseMatrix& m, int max_iters,
                               double tol) {
  require(m.rows() == m.cols(), "power_iteration: matrix must be square");
  if (m.rows() == 0) return 0.0;
  DenseVector v(m.rows());
  // Deterministic start with no symmetry that could hide an eigenvector.
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = 1.0 + 0.1 * static_cast<double>(i % 7);
  }
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    DenseVector w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double next = v.dot(w);
    v = w / norm;
    if (std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next))) {
      return next;
    }
    lambda = next;
  }
  return lambda;
}

void export_dataset_csv(const Problem& problem, const std::string& path) {
  require(problem.kind() != ProblemKind::kQuadratic,
          "export_dataset_csv: quadratic problems have no samples");
  std::ofstream out(path);
  require(static_cast<bool>(out), "export_dataset_csv: cannot open " + path);
  const auto& x = problem.features();
  for (Eigen::Index j = 0; j < x.cols(); ++j) out << 'x' << j << ',';
  out << "y\n";
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << fmt17(x(i, j)) << ',';
    out << fmt17(problem.targets()[i]) << '\n';
  }
}

Problem import_dataset_csv(const std::string& path, ProblemKind kind,
                           double regularizer, std::int64_t batch_size,
                           std::uint64_t seed) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "import_dataset_csv: cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)),
          "import_dataset_csv: missing header");
  const auto cols = std::count(line.begin(), line.end(), ',') + 1;
  require(cols >= 2, "import_dataset_csv: need at least one feature column");
  std::vector<std::vector<double>> rows;
  std::int64_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        throw ConfigError("import_dataset_csv: line " + std::to_string(lineno) +
                          ": bad number '" + cell + "'");
      }
      row.push_back(v);
    }
    if (static_cast<std::int64_t>(row.size()) != cols) {
      throw ConfigError("import_dataset_csv: line " + std::to_string(lineno) +
                        ": expected " + std::to_string(cols) + " fields");
    }
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "import_dataset_csv: no samples");
  DenseMatrix features(static_cast<Eigen::Index>(rows.size()), cols - 1);
  DenseVector targets(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j + 1 < cols; ++j) {
      features(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
    targets[static_cast<Eigen::Index>(i)] = rows[i].back();
  }
  return Problem(kind, std::move(features), std::move(targets), regularizer,
                 batch_size, seed);
}

}  // namespace ecx
