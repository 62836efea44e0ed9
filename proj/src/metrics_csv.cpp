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

#include "ecx/metrics_csv.hpp"

#include <cstdio>
#include <fstream>

namespace ecx {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_metrics_csv(const RunTrace& trace, std::ostream& out) {
  out << kMetricsHeader << '\n';
  const bool ghost = !trace.ghost_residual_norms.empty();
  for (std::size_t i = 0; i < trace.metrics.size(); ++i) {
    const StepMetrics& m = trace.metrics[i];
    out << m.step << ',' << format_double(m.loss) << ','
        << format_double(m.grad_norm_sq) << ',' << format_double(m.v_norm)
        << ',' << format_double(m.worker_delta_norm) << ','
        << format_double(m.server_delta_norm) << ',';
    if (ghost && i < trace.ghost_residual_norms.size()) {
      out << format_double(trace.ghost_residual_norms[i]);
    }
    out << ',' << m.cum_bits << '\n';
  }
}

void write_metrics_csv(const RunTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  write_metrics_csv(trace, out);
}

}  // namespace ecx
