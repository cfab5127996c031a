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
#include <vector>

#include <json.hpp>

#include "jepamon/nn/transformer.hpp"

namespace jepamon::jepa {

/// Transformer encoder over T x 5 inputs (4 features + mask bit). Ten heads
/// do not divide the 32-wide latent space, so the blocks run at width 40 and
/// the three-layer head projects down to `embed_dim`.
struct EncoderConfig {
  int input_dim = 5;
  int model_dim = 40;
  int n_heads = 10;
  int depth = 5;
  int mlp_hidden = 160;
  int head_hidden = 128;
  int embed_dim = 32;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct PredictorConfig {
  int n_heads = 4;
  int depth = 3;
  int mlp_hidden = 128;

  void validate(int embed_dim) const;
  bool operator==(const PredictorConfig&) const = default;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);
void to_json(nlohmann::json& j, const PredictorConfig& c);
void from_json(const nlohmann::json& j, PredictorConfig& c);

struct EncoderCache {
  Matrix input;
  std::vector<nn::EncoderBlockCache> blocks;
  nn::LayerNormCache final_norm;
  nn::MlpCache head;
};

/// Input projection + sinusoidal positions, pre-norm blocks, final layer
/// norm and a three-layer MLP head. Rows of `input` are packed sequences.
class ObjectEncoder {
 public:
  ObjectEncoder() = default;
  ObjectEncoder(const EncoderConfig& config, Rng& rng);

  Matrix forward(const Matrix& input, const nn::Segments& segments,
                 EncoderCache* cache = nullptr) const;
  /// Accumulates parameter gradients from dL/d(output).
  void backward(const EncoderCache& cache, const nn::Segments& segments, const Matrix& dy);
  nn::ParameterSet parameters();
  const EncoderConfig& config() const { return config_; }
  /// Forward-pass flop estimate for one sequence of length T.
  double flops(int length) const;

 private:
  EncoderConfig config_;
  nn::Linear input_proj_;
  std::vector<nn::EncoderBlock> blocks_;
  nn::LayerNorm final_norm_;
  nn::Mlp head_;
};

struct PredictorCache {
  std::vector<nn::DecoderBlockCache> blocks;
  nn::LayerNormCache final_norm;
  Matrix out_input;
};

/// Transformer decoder: mask tokens (learned vector + sinusoidal position of
/// each masked index) cross-attend the context tokens of their sequence.
class Predictor {
 public:
  Predictor() = default;
  Predictor(int embed_dim, const PredictorConfig& config, Rng& rng);

  /// `masked` holds the masked indices of each sequence.
  /// Returns sum(|masked_i|) x embed_dim predictions in index order.
  Matrix forward(const Matrix& context, const nn::Segments& context_segments,
                 std::span<const std::vector<int>> masked, PredictorCache* cache = nullptr) const;
  /// Accumulates parameter gradients; returns dL/d(context).
  Matrix backward(const PredictorCache& cache, const nn::Segments& context_segments,
                  std::span<const std::vector<int>> masked, const Matrix& dy);
  nn::ParameterSet parameters();
  double flops(int length, int n_masked) const;

  /// Mask-token queries for the given indices (learned vector + positions).
  Matrix mask_tokens(std::span<const std::vector<int>> masked) const;

 private:
  int embed_dim_ = 0;
  PredictorConfig config_;
  nn::Parameter mask_token_;
  std::vector<nn::DecoderBlock> blocks_;
  nn::LayerNorm final_norm_;
  nn::Linear out_proj_;
};

/// Segments of the query rows: one run of |masked_i| rows per sequence.
nn::Segments query_segments(std::span<const std::vector<int>> masked);

}  // namespace jepamon::jepa
