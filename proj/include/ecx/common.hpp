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
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ecx {

// Model, gradient and error vectors all live in this type.
using DenseVector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

// Invalid or inconsistent configuration (bad dimensions, k > d, B0 == 0, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class EmptyInputError : public std::runtime_error {
 public:
  explicit EmptyInputError(const std::string& what)
      : std::runtime_error(what) {}
};

// Requested analysis is not defined for the given run (e.g. a closed form
// that assumes a constant step weight).
class UnsupportedConfigError : public std::runtime_error {
 public:
  explicit UnsupportedConfigError(const std::string& what)
      : std::runtime_error(what) {}
};

// Neither sign convention reproduces the simulated residual.
class IdentityFailure : public std::runtime_error {
 public:
  explicit IdentityFailure(const std::string& what)
      : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

inline void require_same_dim(const DenseVector& a, const DenseVector& b,
                             const char* where) {
  if (a.size() != b.size()) {
    throw ConfigError(std::string(where) + ": dimension mismatch (" +
                      std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  }
}

}  // namespace ecx
