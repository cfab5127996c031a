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
#include <span>
#include <string>
#include <vector>

#include "jepamon/matrix.hpp"
#include "jepamon/nn/parameter.hpp"
#include "jepamon/rng.hpp"

namespace jepamon::nn {

/// Several variable-length sequences packed row-wise into one matrix.
/// Sequence i occupies rows [offset[i], offset[i] + length[i]).
struct Segments {
  std::vector<int> offset;
  std::vector<int> length;

  static Segments from_lengths(std::span<const int> lengths);
  static Segments single(int length) { return from_lengths(std::vector<int>{length}); }
  std::size_t count() const { return length.size(); }
  int total_rows() const { return length.empty() ? 0 : offset.back() + length.back(); }
};

/// y = x W + b, with W stored as (in x out).
class Linear {
 public:
  Linear() = default;
  /// Weights and bias uniform in +-1/sqrt(in).
  Linear(int in, int out, Rng& rng);

  Matrix forward(const Matrix& x) const;
  /// Accumulates dW and db; returns dL/dx. `x` is the forward input.
  Matrix backward(const Matrix& x, const Matrix& dy);
  void collect(ParameterSet& set, const std::string& prefix);

  int in_features() const { return static_cast<int>(weight.value.rows()); }
  int out_features() const { return static_cast<int>(weight.value.cols()); }

  Parameter weight;
  Parameter bias;
};

struct LayerNormCache {
  Matrix normalized;  // pre-affine output
  Vector inv_std;
};

/// Normalizes every row over the channel axis, then applies gain and bias.
class LayerNorm {
 public:
  static constexpr double kEpsilon = 1e-5;

  LayerNorm() = default;
  explicit LayerNorm(int dim);

  Matrix forward(const Matrix& x, LayerNormCache* cache = nullptr) const;
  Matrix backward(const LayerNormCache& cache, const Matrix& dy);
  void collect(ParameterSet& set, const std::string& prefix);

  Parameter gain;
  Parameter bias;
};

/// GELU, tanh form: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Matrix gelu(const Matrix& x);
Matrix gelu_backward(const Matrix& x, const Matrix& dy);

struct AttentionCache {
  Matrix query_in;
  Matrix kv_in;
  Matrix q, k, v;
  Matrix heads;                // concatenated head outputs, before the output projection
  std::vector<Matrix> probs;   // [segment * n_heads + head], Lq x Lk
};

/// Scaled dot-product attention with `n_heads` heads followed by an output
/// projection. Queries of segment i attend only to keys of segment i. Keys
/// flagged invalid in `key_valid` get zero weight; a query whose whole key
/// set is invalid attends solely to the key at its own position (clamped to
/// the segment length).
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  /// Throws if dim is not divisible by n_heads.
  MultiHeadAttention(int dim, int n_heads, Rng& rng);

  struct InputGrads {
    Matrix query;
    Matrix kv;
  };

  Matrix forward(const Matrix& query_in, const Segments& query_segments, const Matrix& kv_in,
                 const Segments& kv_segments, std::span<const std::uint8_t> key_valid = {},
                 AttentionCache* cache = nullptr) const;
  InputGrads backward(const AttentionCache& cache, const Segments& query_segments,
                      const Segments& kv_segments, const Matrix& dy);
  void collect(ParameterSet& set, const std::string& prefix);

  int dim() const { return dim_; }
  int n_heads() const { return n_heads_; }

  Linear wq, wk, wv, wo;

 private:
  int dim_ = 0;
  int n_heads_ = 1;
};

/// Standard sin/cos table: P[t, 2i] = sin(t / 10000^(2i/D)),
/// P[t, 2i+1] = cos(t / 10000^(2i/D)).
Matrix sinusoidal_positions(int length, int dim);
/// Rows of the sinusoidal table at arbitrary positions.
Matrix sinusoidal_rows(std::span<const int> positions, int dim);

/// Multiply-accumulate based operation count of one forward pass (2 flops
/// per multiply-add); used for reporting only.
struct FlopCounter {
  double flops = 0.0;
  void linear(double rows, double in, double out) { flops += 2.0 * rows * in * out; }
  void attention(double lq, double lk, double dim) { flops += 4.0 * lq * lk * dim; }
};

}  // namespace jepamon::nn
