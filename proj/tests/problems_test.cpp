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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "ecx/problems.hpp"
#include "ecx/rng.hpp"

namespace ecx {
namespace {

DenseVector vec(std::initializer_list<double> v) {
  DenseVector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

DenseVector gaussian(KeyedRng& r, Eigen::Index d, double scale = 1.0) {
  DenseVector x(d);
  for (Eigen::Index i = 0; i < d; ++i) x[i] = scale * r.normal();
  return x;
}

ProblemSpec quadratic(std::vector<double> spectrum, double noise = 0.0) {
  ProblemSpec s;
  s.kind = ProblemKind::kQuadratic;
  s.spectrum = std::move(spectrum);
  s.grad_noise = noise;
  return s;
}

ProblemSpec linreg(std::int64_t d, std::int64_t n, double noise,
                   double condition = 10.0, std::int64_t batch = 1) {
  ProblemSpec s;
  s.kind = ProblemKind::kLinReg;
  s.dim = d;
  s.samples = n;
  s.label_noise = noise;
  s.condition = condition;
  s.batch_size = batch;
  s.seed = 3;
  return s;
}

ProblemSpec logreg(std::int64_t d, std::int64_t n, double lambda) {
  ProblemSpec s;
  s.kind = ProblemKind::kLogReg;
  s.dim = d;
  s.samples = n;
  s.regularizer = lambda;
  s.seed = 5;
  return s;
}

Shard everything(const Problem& p) {
  if (p.kind() == ProblemKind::kQuadratic) return {{}, true};
  Shard s;
  for (std::int64_t i = 0; i < p.sample_count(); ++i) s.indices.push_back(i);
  return s;
}

TEST(Quadratic, FullGradientExample) {
  Problem p(quadratic({2, 3}));
  EXPECT_EQ(p.full_grad(vec({1, 1})), vec({2, 3}));
  EXPECT_EQ(p.loss(vec({1, 1})), 2.5);
}

TEST(Quadratic, NoiselessStochasticGradientIsExact) {
  Problem p(quadratic({2, 3, 0.5}));
  const DenseVector x = vec({1, -2, 4});
  const DenseVector g = p.stoch_grad({{}, true}, x, {3, 1, 0}, 9);
  EXPECT_TRUE((g.array() == p.full_grad(x).array()).all());
}

TEST(Quadratic, SmoothnessIsLargestEigenvalue) {
  Problem p(quadratic({2, 5, 1}));
  EXPECT_EQ(p.smoothness_L(), 5.0);
  EXPECT_EQ(p.smoothness_LF(), 5.0);
}

TEST(Quadratic, NegativeEigenvalueRejected) {
  EXPECT_THROW(Problem(quadratic({1, -1})), ConfigError);
}

TEST(LinReg, FullBatchMatchesClosedForm) {
  Problem p(linreg(5, 40, 0.0));
  const Shard all = everything(p);
  KeyedRng r(1, Stream::kDiagnostic, 0, 0);
  const DenseVector x = gaussian(r, 5);
  const DenseVector g = p.stoch_grad(all, x, {0, 0, 0}, 1, 40);
  // Independent evaluation: explicit loops over rows.
  DenseVector expect = DenseVector::Zero(5);
  for (std::int64_t i = 0; i < 40; ++i) {
    double m = 0.0;
    for (Eigen::Index j = 0; j < 5; ++j) m += p.features()(i, j) * x[j];
    const double res = m - p.targets()[i];
    for (Eigen::Index j = 0; j < 5; ++j) expect[j] += p.features()(i, j) * res;
  }
  expect /= 40.0;
  EXPECT_LE((g - expect).norm(), 1e-13 * expect.norm());
}

TEST(LinReg, StochasticGradientIsUnbiased) {
  Problem p(linreg(4, 64, 0.1));
  const Shard all = everything(p);
  KeyedRng r(2, Stream::kDiagnostic, 0, 0);
  const DenseVector x = gaussian(r, 4);
  const int n = 100000;
  DenseVector sum = DenseVector::Zero(4), sum2 = DenseVector::Zero(4);
  for (int k = 0; k < n; ++k) {
    const DenseVector g = p.stoch_grad(all, x, {static_cast<std::uint64_t>(k), 0, 0}, 7);
    sum += g;
    sum2 += g.cwiseProduct(g);
  }
  const DenseVector full = p.full_grad(x);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double mean = sum[i] / n;
    const double se = std::sqrt((sum2[i] / n - mean * mean) / n);
    EXPECT_LT(std::abs(mean - full[i]), 4 * se) << "coordinate " << i;
  }
}

TEST(LinReg, NoiselessMinimumIsZero) {
  Problem p(linreg(6, 50, 0.0));
  // Normal equations solved independently of the library's QR path.
  const DenseMatrix& x = p.features();
  const DenseVector xs = (x.transpose() * x).ldlt().solve(x.transpose() * p.targets());
  EXPECT_LT(p.loss(xs), 1e-10);
  EXPECT_LT(p.full_grad(xs).norm(), 1e-8);
  ASSERT_TRUE(p.minimizer().has_value());
  EXPECT_LT((*p.minimizer() - xs).norm(), 1e-8);
  EXPECT_LT((xs - p.true_parameter()).norm(), 1e-8);
}

TEST(LinReg, LossNeverBelowOptimum) {
  for (const auto& spec : {linreg(6, 50, 0.0), linreg(6, 50, 0.3)}) {
    Problem p(spec);
    const double fstar = *p.optimal_value();
    KeyedRng r(4, Stream::kDiagnostic, 0, 0);
    for (int k = 0; k < 200; ++k) {
      const DenseVector x = *p.minimizer() + gaussian(r, 6, std::pow(10.0, -k % 8));
      ASSERT_GE(p.loss(x), fstar - 1e-12);
    }
  }
  Problem q(quadratic({1, 2, 3}));
  EXPECT_EQ(*q.optimal_value(), 0.0);
}

TEST(LinReg, SmoothnessAgreesWithPowerIteration) {
  Problem p(linreg(12, 300, 0.1));
  const DenseMatrix h =
      p.features().transpose() * p.features() / static_cast<double>(p.sample_count());
  const double pi = power_iteration_max_eig(h);
  EXPECT_NEAR(p.smoothness_L(), pi, 1e-8 * pi);
  EXPECT_GE(p.smoothness_LF(), p.smoothness_L());
}

TEST(LinReg, ZeroDesignHasZeroSmoothness) {
  Problem p(ProblemKind::kLinReg, DenseMatrix::Zero(5, 3), DenseVector::Zero(5),
            0.0, 1, 0);
  EXPECT_EQ(p.smoothness_L(), 0.0);
  EXPECT_EQ(power_iteration_max_eig(DenseMatrix::Zero(3, 3)), 0.0);
}

TEST(LinReg, DesignConditioning) {
  // Column variances follow the log-spaced spectrum from 1 to 1/condition.
  Problem p(linreg(3, 20000, 0.0, 100.0));
  const DenseVector var =
      p.features().colwise().squaredNorm().transpose() / 20000.0;
  EXPECT_NEAR(var[0], 1.0, 0.05);
  EXPECT_NEAR(var[1], 0.1, 0.005);
  EXPECT_NEAR(var[2], 0.01, 0.0005);
}

TEST(LogReg, SmoothnessBound) {
  Problem p(logreg(5, 100, 0.01));
  const DenseMatrix& x = p.features();
  Eigen::JacobiSVD<DenseMatrix> svd(x);
  const double op = svd.singularValues()[0];
  EXPECT_NEAR(p.smoothness_L(), op * op / 400.0 + 0.01, 1e-12);
  for (Eigen::Index i = 0; i < p.targets().size(); ++i) {
    ASSERT_TRUE(p.targets()[i] == 1.0 || p.targets()[i] == -1.0);
  }
}

double finite_difference_error(const Problem& p, const DenseVector& x) {
  const DenseVector g = p.full_grad(x);
  DenseVector fd(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
    DenseVector a = x, b = x;
    a[j] += h;
    b[j] -= h;
    fd[j] = (p.loss(a) - p.loss(b)) / (2.0 * h);
  }
  return (g - fd).norm() / std::max(g.norm(), 1e-300);
}

TEST(Gradients, MatchFiniteDifferences) {
  const std::vector<ProblemSpec> specs{quadratic({0.5, 2, 3, 7}),
                                       linreg(6, 80, 0.1), logreg(6, 80, 0.05)};
  for (const auto& spec : specs) {
    Problem p(spec);
    KeyedRng r(6, Stream::kDiagnostic, 0, 0);
    for (int k = 0; k < 10; ++k) {
      const DenseVector x = gaussian(r, p.dim());
      EXPECT_LT(finite_difference_error(p, x), 1e-6) << to_string(spec.kind);
    }
  }
}

TEST(SampleHandle, SameHandleSameBits) {
  Problem p(linreg(5, 64, 0.1, 10.0, 4));
  const Shard all = everything(p);
  const DenseVector x = vec({1, 2, 3, 4, 5});
  const SampleHandle h{12, 3, 0};
  EXPECT_TRUE((p.stoch_grad(all, x, h, 5).array() ==
               p.stoch_grad(all, x, h, 5).array())
                  .all());
}

TEST(SampleHandle, TwoPointsShareTheMinibatch) {
  Problem p(linreg(5, 64, 0.1, 10.0, 3));
  const Shard all = everything(p);
  const SampleHandle h{8, 1, 0};
  const auto rows = p.minibatch_indices(all, h, 5);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows, p.minibatch_indices(all, h, 5));
  KeyedRng r(8, Stream::kDiagnostic, 0, 0);
  for (int k = 0; k < 2; ++k) {
    const DenseVector x = gaussian(r, 5);
    DenseVector expect = DenseVector::Zero(5);
    for (auto i : rows) {
      expect += (p.features().row(i).dot(x) - p.targets()[i]) *
                p.features().row(i).transpose();
    }
    expect /= 3.0;
    EXPECT_LE((p.stoch_grad(all, x, h, 5) - expect).norm(), 1e-14 * expect.norm());
  }
  EXPECT_NE(rows, p.minibatch_indices(all, {8, 1, kDiagnosticLane}, 5));
}

TEST(SampleHandle, EmptyShardRejected) {
  Problem p(linreg(3, 10, 0.1));
  EXPECT_THROW(p.stoch_grad(Shard{}, vec({0, 0, 0}), {0, 0, 0}, 1), ConfigError);
}

TEST(Variance, ZeroForNoiselessProblem) {
  Problem p(quadratic({1, 2}));
  EXPECT_EQ(variance_sigma2(p, {{}, true}, vec({1, 1}), 10, 3), 0.0);
}

TEST(Variance, QuadraticNoiseMatchesAnalytic) {
  Problem p(quadratic({1, 2, 3}, 0.5));
  const double s2 = variance_sigma2(p, {{}, true}, vec({1, 1, 1}), 20000, 3);
  EXPECT_NEAR(s2, 3 * 0.25, 0.05 * 0.75);
}

TEST(Variance, LinRegMatchesAnalyticAtTruth) {
  // Identity-covariance design evaluated at the generating parameter: the
  // per-sample gradient is -sigma * eps * a, so E||.||^2 ~ d sigma^2 / b.
  const double sigma = 0.5;
  for (std::int64_t b : {1, 2}) {
    Problem p(linreg(8, 20000, sigma, 1.0, b));
    const double s2 = variance_sigma2(p, everything(p), p.true_parameter(), 40000, 2);
    const double expect = 8 * sigma * sigma / static_cast<double>(b);
    EXPECT_NEAR(s2, expect, 0.1 * expect) << "batch " << b;
  }
}

TEST(Variance, BatchDoublingHalves) {
  Problem p(linreg(6, 500, 0.3));
  const Shard all = everything(p);
  const DenseVector x = DenseVector::Zero(6);
  const double s1 = variance_sigma2(p, all, x, 40000, 1, 4);
  const double s2 = variance_sigma2(p, all, x, 40000, 1, 8);
  EXPECT_NEAR(s1 / s2, 2.0, 0.15);
}

TEST(Variance, NeedsTwoTrials) {
  Problem p(quadratic({1}));
  EXPECT_THROW(variance_sigma2(p, {{}, true}, vec({1}), 1, 0), ConfigError);
}

TEST(Partition, SingleWorkerGetsEverything) {
  Problem p(linreg(3, 37, 0.1));
  const auto shards = partition_data(p, 1, 4, 0.0);
  ASSERT_EQ(shards.size(), 1u);
  EXPECT_EQ(shards[0].indices, everything(p).indices);
}

void expect_partition(const Problem& p, const std::vector<Shard>& shards) {
  std::set<std::int64_t> seen;
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& s : shards) {
    lo = std::min(lo, s.indices.size());
    hi = std::max(hi, s.indices.size());
    for (auto i : s.indices) EXPECT_TRUE(seen.insert(i).second) << "duplicate " << i;
  }
  EXPECT_EQ(static_cast<std::int64_t>(seen.size()), p.sample_count());
  EXPECT_LE(hi - lo, 1u);
}

TEST(Partition, UnionAndDisjoint) {
  Problem p(linreg(3, 103, 0.1));
  for (double h : {0.0, 0.5, 1.0}) {
    for (std::int64_t n : {2, 7, 103}) expect_partition(p, partition_data(p, n, 9, h));
  }
}

TEST(Partition, IidShardsHaveGlobalMean) {
  Problem p(linreg(3, 8000, 0.1));
  const DenseVector& y = p.targets();
  const double mean = y.mean();
  const double sd = std::sqrt((y.array() - mean).square().mean());
  for (const auto& s : partition_data(p, 4, 2, 0.0)) {
    double m = 0.0;
    for (auto i : s.indices) m += y[i];
    m /= static_cast<double>(s.indices.size());
    EXPECT_LT(std::abs(m - mean), 3 * sd / std::sqrt(static_cast<double>(s.indices.size())));
  }
}

TEST(Partition, FullHeterogeneitySortsByTarget) {
  Problem p(linreg(3, 200, 0.1));
  const auto shards = partition_data(p, 4, 2, 1.0);
  const DenseVector& y = p.targets();
  for (std::size_t k = 0; k + 1 < shards.size(); ++k) {
    double hi = -INFINITY, lo = INFINITY;
    for (auto i : shards[k].indices) hi = std::max(hi, y[i]);
    for (auto i : shards[k + 1].indices) lo = std::min(lo, y[i]);
    EXPECT_LE(hi, lo);
  }
}

TEST(Partition, TooManyWorkers) {
  Problem p(linreg(3, 5, 0.1));
  EXPECT_THROW(partition_data(p, 6, 0, 0.0), ConfigError);
}

TEST(Partition, QuadraticUsesPopulationShards) {
  Problem p(quadratic({1, 2}));
  for (const auto& s : partition_data(p, 3, 0, 0.0)) EXPECT_TRUE(s.population);
}

TEST(Dataset, CsvRoundTripIsExact) {
  Problem p(linreg(4, 30, 0.2));
  const auto path =
      (std::filesystem::temp_directory_path() / "ecx_dataset_roundtrip.csv").string();
  export_dataset_csv(p, path);
  Problem q = import_dataset_csv(path, ProblemKind::kLinReg, 0.0, 1, 0);
  std::remove(path.c_str());
  EXPECT_TRUE((p.features().array() == q.features().array()).all());
  EXPECT_TRUE((p.targets().array() == q.targets().array()).all());
}

TEST(Dataset, DeterministicFromSeed) {
  Problem a(linreg(4, 30, 0.2)), b(linreg(4, 30, 0.2));
  EXPECT_TRUE((a.features().array() == b.features().array()).all());
  auto spec = linreg(4, 30, 0.2);
  spec.seed = 99;
  Problem c(spec);
  EXPECT_FALSE((a.features().array() == c.features().array()).all());
}

}  // namespace
}  // namespace ecx
