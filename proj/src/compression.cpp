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

#include "ecx/compression.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "ecx/rng.hpp"

namespace ecx {
namespace {

// ceil(log2(v)) for v >= 1.
std::uint64_t ceil_log2(std::uint64_t v) {
  return v <= 1 ? 0 : std::bit_width(v - 1);
}

DenseVector one_bit(const DenseVector& x) {
  const double scale = x.cwiseAbs().sum() / static_cast<double>(x.size());
  DenseVector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out[i] = x[i] >= 0.0 ? scale : -scale;
  }
  return out;
}

DenseVector top_k(const DenseVector& x, std::int64_t k) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  // Ties go to the lower index.
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                    [&x](Eigen::Index a, Eigen::Index b) {
                      const double fa = std::abs(x[a]);
                      const double fb = std::abs(x[b]);
                      return fa > fb || (fa == fb && a < b);
                    });
  DenseVector out = DenseVector::Zero(x.size());
  for (std::int64_t j = 0; j < k; ++j) out[idx[j]] = x[idx[j]];
  return out;
}

DenseVector rand_k(const DenseVector& x, const CompressorSpec& spec,
                   std::uint64_t step, std::uint32_t node) {
  KeyedRng rng(spec.seed, Stream::kCompression, step, node);
  const auto d = static_cast<std::uint64_t>(x.size());
  std::vector<Eigen::Index> idx(d);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  // Partial Fisher-Yates: the first k slots hold a uniform k-subset.
  for (std::int64_t j = 0; j < spec.k; ++j) {
    const auto pick = j + static_cast<std::int64_t>(rng.below(d - j));
    std::swap(idx[j], idx[pick]);
  }
  const double factor =
      spec.rescale ? static_cast<double>(d) / static_cast<double>(spec.k)
                   : 1.0;
  DenseVector out = DenseVector::Zero(x.size());
  for (std::int64_t j = 0; j < spec.k; ++j) {
    out[idx[j]] = spec.rescale ? factor * x[idx[j]] : x[idx[j]];
  }
  return out;
}

DenseVector stoch_quant(const DenseVector& x, const CompressorSpec& spec,
                        std::uint64_t step, std::uint32_t node) {
  const double norm_inf = x.cwiseAbs().maxCoeff();
  if (norm_inf == 0.0) return DenseVector::Zero(x.size());
  KeyedRng rng(spec.seed, Stream::kCompression, step, node);
  const auto levels = static_cast<double>(spec.levels);
  DenseVector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double r = std::abs(x[i]) / norm_inf * levels;
    const double lo = std::floor(r);
    const double u = rng.uniform();
    const double q = lo + (u < r - lo ? 1.0 : 0.0);
    const double mag = norm_inf * q / levels;
    out[i] = x[i] < 0.0 ? -mag : mag;
  }
  return out;
}

}  // namespace

void CompressorSpec::validate(std::int64_t d) const {
  require(d >= 1, "compressor: dimension must be positive");
  switch (kind) {
    case CompressorKind::kTopK:
    case CompressorKind::kRandK:
      require(k >= 1 && k <= d, "compressor: k must satisfy 1 <= k <= d (k=" +
                                    std::to_string(k) +
                                    ", d=" + std::to_string(d) + ")");
      break;
    case CompressorKind::kStochQuant:
      require(levels >= 1, "compressor: StochQuant needs levels >= 1");
      break;
    default:
      break;
  }
}

std::string to_string(CompressorKind kind) {
  switch (kind) {
    case CompressorKind::kIdentity: return "identity";
    case CompressorKind::kOneBit: return "onebit";
    case CompressorKind::kTopK: return "topk";
    case CompressorKind::kRandK: return "randk";
    case CompressorKind::kStochQuant: return "stochquant";
  }
  return "?";
}

CompressorKind compressor_kind_from_string(const std::string& name) {
  for (auto k : {CompressorKind::kIdentity, CompressorKind::kOneBit,
                 CompressorKind::kTopK, CompressorKind::kRandK,
                 CompressorKind::kStochQuant}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown compressor kind '" + name + "'");
}

CompressionResult compress(const DenseVector& x, const CompressorSpec& spec,
                           std::uint64_t step, std::uint32_t node_id) {
  spec.validate(x.size());
  CompressionResult result;
  switch (spec.kind) {
    case CompressorKind::kIdentity:
      result.compressed = x;
      break;
    case CompressorKind::kOneBit:
      result.compressed = one_bit(x);
      break;
    case CompressorKind::kTopK:
      result.compressed = top_k(x, spec.k);
      break;
    case CompressorKind::kRandK:
      result.compressed = rand_k(x, spec, step, node_id);
      break;
    case CompressorKind::kStochQuant:
      result.compressed = stoch_quant(x, spec, step, node_id);
      break;
  }
  result.residual = x - result.compressed;
  return result;
}

std::uint64_t message_bits(const CompressorSpec& spec, std::int64_t d) {
  const auto ud = static_cast<std::uint64_t>(d);
  switch (spec.kind) {
    case CompressorKind::kIdentity:
      return 64 * ud;
    case CompressorKind::kOneBit:
      return ud + 64;
    case CompressorKind::kTopK:
    case CompressorKind::kRandK:
      return static_cast<std::uint64_t>(spec.k) * (64 + ceil_log2(ud));
    case CompressorKind::kStochQuant:
      return ud * ceil_log2(2 * static_cast<std::uint64_t>(spec.levels) + 1) +
             64;
  }
  return 0;
}

double measured_epsilon(std::span<const double> residual_norms) {
  if (residual_norms.empty()) {
    throw EmptyInputError("measured_epsilon: no residuals recorded");
  }
  double sup = 0.0;
  for (double r : residual_norms) sup = std::max(sup, r);
  double eps = std::sqrt(2.0) * sup;
  // sqrt(2) is inexact; round up so the bound holds in floating point too.
  while (eps * eps / 2.0 < sup * sup) {
    eps = std::nextafter(eps, std::numeric_limits<double>::infinity());
  }
  return eps;
}

}  // namespace ecx
