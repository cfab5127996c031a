// Copyright 2026 The jepamon Authors
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "jepamon/matrix.hpp"
#include "jepamon/nn/parameter.hpp"

namespace jepamon::nn {

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // dL/dpred
};

/// Mean absolute error over all elements. Subgradient sign(pred - target) / n
/// with sign(0) = 0.
LossResult l1_loss(const Matrix& pred, const Matrix& target);

struct AdamState {
  double learning_rate = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// Bias-corrected ADAM update of every parameter from its gradient buffer.
/// Moment buffers are created on first use.
void adam_step(const ParameterSet& params, AdamState& state);

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;

  bool passed(double tol) const { return max_rel_error <= tol; }
};

/// Central differences of `loss` w.r.t. every coordinate, compared to
/// `analytic`. Relative error is |a - n| / max(|a|, |n|, abs_floor).
/// Coordinates are restored after probing.
GradCheckReport finite_difference_check(const std::function<double()>& loss,
                                        std::span<double* const> coords,
                                        std::span<const double> analytic, double h = 1e-5,
                                        double abs_floor = 1e-8);

// Versioned binary tensor archive:
//   "JEPAMONT" | u32 version | u32 count |
//   count x (u32 name_len | name | u32 rows | u32 cols | rows*cols f64, row-major)
// All integers and doubles little-endian.
inline constexpr std::uint32_t kTensorArchiveVersion = 1;

struct NamedTensor {
  std::string name;
  Matrix value;
};

void write_tensors(std::ostream& out, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_tensors(std::istream& in);
void save_tensors(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> load_tensors(const std::filesystem::path& path);

}  // namespace jepamon::nn
