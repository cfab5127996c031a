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

#include "jepamon/nn/optim.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "jepamon/errors.hpp"

namespace jepamon::nn {

LossResult l1_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw Error("l1_loss: shape mismatch");
  }
  if (pred.size() == 0) throw Error("l1_loss: empty input");
  const double n = static_cast<double>(pred.size());
  const Matrix diff = pred - target;
  LossResult r;
  r.loss = diff.cwiseAbs().sum() / n;
  r.grad = diff.unaryExpr([n](double d) { return d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0); });
  return r;
}

void adam_step(const ParameterSet& params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const auto& e : params) {
      state.first_moment.push_back(Matrix::Zero(e.param->value.rows(), e.param->value.cols()));
      state.second_moment.push_back(Matrix::Zero(e.param->value.rows(), e.param->value.cols()));
    }
  }
  if (state.first_moment.size() != params.size()) throw Error("adam: state/parameter mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * p.grad;
    v = state.beta2 * v + (1.0 - state.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= state.learning_rate * (m.array() / c1) /
                       ((v.array() / c2).sqrt() + state.epsilon);
  }
}

GradCheckReport finite_difference_check(const std::function<double()>& loss,
                                        std::span<double* const> coords,
                                        std::span<const double> analytic, double h,
                                        double abs_floor) {
  if (coords.size() != analytic.size()) throw Error("gradient check: size mismatch");
  GradCheckReport report;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    double* c = coords[i];
    const double saved = *c;
    *c = saved + h;
    const double up = loss();
    *c = saved - h;
    const double down = loss();
    *c = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double abs_err = std::abs(numeric - analytic[i]);
    const double rel = abs_err / std::max({std::abs(numeric), std::abs(analytic[i]), abs_floor});
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
    ++report.checked;
  }
  return report;
}

namespace {

static_assert(std::endian::native == std::endian::little, "tensor archive assumes little-endian");

constexpr char kMagic[8] = {'J', 'E', 'P', 'A', 'M', 'O', 'N', 'T'};

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw SchemaError("tensor archive: truncated");
  return v;
}

}  // namespace

void write_tensors(std::ostream& out, std::span<const NamedTensor> tensors) {
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kTensorArchiveVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.value.rows()));
    put_u32(out, static_cast<std::uint32_t>(t.value.cols()));
    out.write(reinterpret_cast<const char*>(t.value.data()),
              static_cast<std::streamsize>(t.value.size() * sizeof(double)));
  }
}

std::vector<NamedTensor> read_tensors(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw SchemaError("tensor archive: bad magic");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kTensorArchiveVersion) {
    throw SchemaError("tensor archive: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = get_u32(in);
  std::vector<NamedTensor> tensors(count);
  for (NamedTensor& t : tensors) {
    t.name.resize(get_u32(in));
    in.read(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    t.value.resize(rows, cols);
    in.read(reinterpret_cast<char*>(t.value.data()),
            static_cast<std::streamsize>(t.value.size() * sizeof(double)));
    if (!in) throw SchemaError("tensor archive: truncated tensor '" + t.name + "'");
  }
  return tensors;
}

void save_tensors(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_tensors(out, tensors);
  if (!out) throw Error("write failed: '" + path.string() + "'");
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_tensors(in);
}

}  // namespace jepamon::nn
