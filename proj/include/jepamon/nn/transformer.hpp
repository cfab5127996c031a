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

#include <span>
#include <string>
#include <vector>

#include "jepamon/nn/layers.hpp"

namespace jepamon::nn {

struct MlpCache {
  std::vector<Matrix> inputs;       // input of every linear layer
  std::vector<Matrix> activations;  // pre-GELU output of every hidden layer
};

/// Linear layers with GELU between consecutive layers (none after the last).
class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, hidden..., out}.
  Mlp(std::span<const int> widths, Rng& rng);

  Matrix forward(const Matrix& x, MlpCache* cache = nullptr) const;
  Matrix backward(const MlpCache& cache, const Matrix& dy);
  void collect(ParameterSet& set, const std::string& prefix);

  std::vector<Linear> layers;
};

struct EncoderBlockCache {
  LayerNormCache ln1;
  AttentionCache attn;
  LayerNormCache ln2;
  MlpCache mlp;
};

/// Pre-norm transformer encoder block:
///   x += SelfAttention(LN(x)); x += MLP(LN(x)).
class EncoderBlock {
 public:
  EncoderBlock() = default;
  EncoderBlock(int dim, int n_heads, int mlp_hidden, Rng& rng);

  Matrix forward(const Matrix& x, const Segments& segments, std::span<const std::uint8_t> key_valid,
                 EncoderBlockCache* cache = nullptr) const;
  Matrix backward(const EncoderBlockCache& cache, const Segments& segments, const Matrix& dy);
  void collect(ParameterSet& set, const std::string& prefix);

  LayerNorm ln1;
  MultiHeadAttention attn;
  LayerNorm ln2;
  Mlp mlp;
};

struct DecoderBlockCache {
  LayerNormCache ln1;
  AttentionCache self_attn;
  LayerNormCache ln2;
  AttentionCache cross_attn;
  LayerNormCache ln3;
  MlpCache mlp;
};

/// Pre-norm transformer decoder block over query tokens and a memory:
///   q += SelfAttention(LN(q)); q += CrossAttention(LN(q), memory); q += MLP(LN(q)).
class DecoderBlock {
 public:
  DecoderBlock() = default;
  DecoderBlock(int dim, int n_heads, int mlp_hidden, Rng& rng);

  Matrix forward(const Matrix& queries, const Segments& query_segments, const Matrix& memory,
                 const Segments& memory_segments, DecoderBlockCache* cache = nullptr) const;

  struct Grads {
    Matrix queries;
    Matrix memory;
  };
  Grads backward(const DecoderBlockCache& cache, const Segments& query_segments,
                 const Segments& memory_segments, const Matrix& dy);
  void collect(ParameterSet& set, const std::string& prefix);

  LayerNorm ln1;
  MultiHeadAttention self_attn;
  LayerNorm ln2;
  MultiHeadAttention cross_attn;
  LayerNorm ln3;
  Mlp mlp;
};

}  // namespace jepamon::nn
