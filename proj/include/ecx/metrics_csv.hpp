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

#include <ostream>
#include <string>

#include "ecx/simulator.hpp"

namespace ecx {

inline constexpr const char* kMetricsHeader =
    "step,loss,grad_norm_sq,v_norm,worker_delta_norm,server_delta_norm,"
    "ghost_residual_norm,cum_bits";

// 17 significant digits, so the text round-trips to the same double.
std::string format_double(double v);

// One row per recorded step. The ghost column is left empty unless the
// trace carries ghost residual norms.
void write_metrics_csv(const RunTrace& trace, std::ostream& out);
void write_metrics_csv(const RunTrace& trace, const std::string& path);

}  // namespace ecx
