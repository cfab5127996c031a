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

#include "jepamon/nn/parameter.hpp"

#include <set>

#include "jepamon/errors.hpp"

namespace jepamon::nn {

void ParameterSet::add(std::string name, Parameter& p) {
  for (const Entry& e : entries_) {
    if (e.name == name) throw Error("duplicate parameter name '" + name + "'");
  }
  entries_.push_back({std::move(name), &p});
}

void ParameterSet::append(const ParameterSet& other) {
  for (const Entry& e : other.entries_) add(e.name, *e.param);
}

Parameter& ParameterSet::at(const std::string& name) const {
  for (const Entry& e : entries_) {
    if (e.name == name) return *e.param;
  }
  throw Error("no parameter named '" + name + "'");
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += static_cast<std::size_t>(e.param->size());
  return n;
}

void ParameterSet::zero_grad() const {
  for (const Entry& e : entries_) e.param->zero_grad();
}

std::vector<double*> ParameterSet::value_pointers() const {
  std::vector<double*> out;
  out.reserve(count());
  for (const Entry& e : entries_) {
    double* data = e.param->value.data();
    for (Eigen::Index i = 0; i < e.param->size(); ++i) out.push_back(data + i);
  }
  return out;
}

std::vector<double> ParameterSet::flat_grads() const {
  std::vector<double> out;
  out.reserve(count());
  for (const Entry& e : entries_) {
    const double* data = e.param->grad.data();
    out.insert(out.end(), data, data + e.param->size());
  }
  return out;
}

void check_same_layout(const ParameterSet& a, const ParameterSet& b) {
  if (a.size() != b.size()) {
    throw SchemaError("parameter sets differ in size: " + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& ea = a.entries()[i];
    const auto& eb = b.entries()[i];
    if (ea.name != eb.name || ea.param->value.rows() != eb.param->value.rows() ||
        ea.param->value.cols() != eb.param->value.cols()) {
      throw SchemaError("parameter layout mismatch at '" + ea.name + "' vs '" + eb.name + "'");
    }
  }
}

}  // namespace jepamon::nn
