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

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "jepamon/matrix.hpp"

namespace jepamon::nn {

/// A trainable tensor with its gradient buffer. Vectors are stored as 1 x n.
struct Parameter {
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(Eigen::Index rows, Eigen::Index cols)
      : value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Named, ordered view over the parameters of a model. The order is the
/// registration order of the owning modules and is identical for two models
/// of the same architecture, which EMA updates and checkpoints rely on.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Parameter* param;
  };

  void add(std::string name, Parameter& p);
  void append(const ParameterSet& other);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  Parameter& operator[](std::size_t i) const { return *entries_[i].param; }
  /// Throws if absent.
  Parameter& at(const std::string& name) const;

  /// Total number of scalar values.
  std::size_t count() const;
  void zero_grad() const;

  /// Flat pointers to every scalar, in entry order then row-major order.
  std::vector<double*> value_pointers() const;
  std::vector<double> flat_grads() const;

 private:
  std::vector<Entry> entries_;
};

/// Throws SchemaError unless both sets have the same names and shapes.
void check_same_layout(const ParameterSet& a, const ParameterSet& b);

}  // namespace jepamon::nn
