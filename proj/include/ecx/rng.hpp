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

#include <array>
#include <cstdint>

namespace ecx {

// Philox4x32-10 block function (Salmon et al., SC'11). Stateless: the same
// (key, counter) always yields the same four words.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Independent purposes never share a counter space.
enum class Stream : std::uint32_t {
  kDataset = 1,
  kPartition = 2,
  kSampling = 3,
  kCompression = 4,
  kDiagnostic = 5,
  kInit = 6,
};

// Counter-based generator keyed by (seed, stream, step, node, lane). Two
// instances built from the same tuple produce the same sequence, so any
// consumer can be replayed without shared state. step uses 32 bits and lane
// 24 bits.
class KeyedRng {
 public:
  KeyedRng(std::uint64_t seed, Stream stream, std::uint64_t step,
           std::uint32_t node, std::uint32_t lane = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }
  double normal();
  // Uniform integer in [0, bound); bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ecx
