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

#include <cstdint>
#include <span>
#include <string>

#include "ecx/common.hpp"

namespace ecx {

enum class CompressorKind { kIdentity, kOneBit, kTopK, kRandK, kStochQuant };

// Describes C_w[.]. `k` is used by TopK/RandK, `levels` by StochQuant,
// `rescale` by RandK; `seed` keys the randomness of the stochastic kinds.
struct CompressorSpec {
  CompressorKind kind = CompressorKind::kIdentity;
  std::int64_t k = 1;
  bool rescale = true;
  std::int64_t levels = 1;
  std::uint64_t seed = 0;

  static CompressorSpec identity() { return {}; }
  static CompressorSpec one_bit() {
    CompressorSpec s;
    s.kind = CompressorKind::kOneBit;
    return s;
  }
  static CompressorSpec top_k(std::int64_t k) {
    CompressorSpec s;
    s.kind = CompressorKind::kTopK;
    s.k = k;
    return s;
  }
  static CompressorSpec rand_k(std::int64_t k, bool rescale,
                               std::uint64_t seed) {
    CompressorSpec s;
    s.kind = CompressorKind::kRandK;
    s.k = k;
    s.rescale = rescale;
    s.seed = seed;
    return s;
  }
  static CompressorSpec stoch_quant(std::int64_t levels, std::uint64_t seed) {
    CompressorSpec s;
    s.kind = CompressorKind::kStochQuant;
    s.levels = levels;
    s.seed = seed;
    return s;
  }

  bool is_stochastic() const {
    return kind == CompressorKind::kRandK ||
           kind == CompressorKind::kStochQuant;
  }

  // Throws ConfigError if these settings cannot be applied to dimension d.
  void validate(std::int64_t d) const;
};

std::string to_string(CompressorKind kind);
CompressorKind compressor_kind_from_string(const std::string& name);

// residual is defined as input - compressed.
struct CompressionResult {
  DenseVector compressed;
  DenseVector residual;
};

// Applies the compressor. Stochastic kinds are a pure function of
// (x, spec.seed, step, node_id).
CompressionResult compress(const DenseVector& x, const CompressorSpec& spec,
                           std::uint64_t step, std::uint32_t node_id);

// Bits needed to send one compressed vector of dimension d.
std::uint64_t message_bits(const CompressorSpec& spec, std::int64_t d);

// eps_hat = sqrt(2) * max ||delta||, so that every recorded residual
// satisfies ||delta||^2 <= eps_hat^2 / 2.
double measured_epsilon(std::span<const double> residual_norms);

}  // namespace ecx
