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

#include "jepamon/jepa/model.hpp"

#include <algorithm>

#include "jepamon/errors.hpp"

namespace jepamon::jepa {

using nlohmann::json;

void EncoderConfig::validate() const {
  if (input_dim < 1 || model_dim < 1 || depth < 1 || mlp_hidden < 1 || head_hidden < 1 ||
      embed_dim < 1) {
    throw ConfigError("encoder: all widths and depth must be positive");
  }
  if (n_heads < 1 || model_dim % n_heads != 0) {
    throw ConfigError("encoder: model_dim " + std::to_string(model_dim) +
                      " is not divisible by n_heads " + std::to_string(n_heads));
  }
}

void PredictorConfig::validate(int embed_dim) const {
  if (depth < 1 || mlp_hidden < 1) throw ConfigError("predictor: depth and width must be positive");
  if (n_heads < 1 || embed_dim % n_heads != 0) {
    throw ConfigError("predictor: embed_dim " + std::to_string(embed_dim) +
                      " is not divisible by n_heads " + std::to_string(n_heads));
  }
}

namespace {

template <typename T>
void check_keys(const json& j, const T& defaults, const char* what) {
  json ref = defaults;
  for (const auto& [key, value] : j.items()) {
    if (!ref.contains(key)) throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
  }
}

}  // namespace

void to_json(json& j, const EncoderConfig& c) {
  j = json{{"input_dim", c.input_dim},   {"model_dim", c.model_dim},
           {"n_heads", c.n_heads},       {"depth", c.depth},
           {"mlp_hidden", c.mlp_hidden}, {"head_hidden", c.head_hidden},
           {"embed_dim", c.embed_dim}};
}

void from_json(const json& j, EncoderConfig& c) {
  check_keys(j, EncoderConfig{}, "encoder");
  c.input_dim = j.value("input_dim", c.input_dim);
  c.model_dim = j.value("model_dim", c.model_dim);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.depth = j.value("depth", c.depth);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
}

void to_json(json& j, const PredictorConfig& c) {
  j = json{{"n_heads", c.n_heads}, {"depth", c.depth}, {"mlp_hidden", c.mlp_hidden}};
}

void from_json(const json& j, PredictorConfig& c) {
  check_keys(j, PredictorConfig{}, "predictor");
  c.n_heads = j.value("n_heads", c.n_heads);
  c.depth = j.value("depth", c.depth);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
}

// ---------------------------------------------------------------- Encoder

ObjectEncoder::ObjectEncoder(const EncoderConfig& config, Rng& rng)
    : config_(config), input_proj_(config.input_dim, config.model_dim, rng) {
  config.validate();
  for (int i = 0; i < config.depth; ++i) {
    blocks_.emplace_back(config.model_dim, config.n_heads, config.mlp_hidden, rng);
  }
  final_norm_ = nn::LayerNorm(config.model_dim);
  const int widths[] = {config.model_dim, config.head_hidden, config.head_hidden, config.embed_dim};
  head_ = nn::Mlp(widths, rng);
}

Matrix ObjectEncoder::forward(const Matrix& input, const nn::Segments& segments,
                              EncoderCache* cache) const {
  if (input.cols() != config_.input_dim) {
    throw Error("encoder: expected " + std::to_string(config_.input_dim) + " input columns, got " +
                std::to_string(input.cols()));
  }
  if (!input.allFinite()) throw Error("encoder: non-finite input");
  int max_len = 0;
  for (int len : segments.length) max_len = std::max(max_len, len);
  const Matrix table = nn::sinusoidal_positions(max_len, config_.model_dim);

  Matrix h = input_proj_.forward(input);
  for (std::size_t s = 0; s < segments.count(); ++s) {
    h.middleRows(segments.offset[s], segments.length[s]) += table.topRows(segments.length[s]);
  }
  if (cache) {
    cache->input = input;
    cache->blocks.resize(blocks_.size());
  }
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    h = blocks_[b].forward(h, segments, {}, cache ? &cache->blocks[b] : nullptr);
  }
  h = final_norm_.forward(h, cache ? &cache->final_norm : nullptr);
  return head_.forward(h, cache ? &cache->head : nullptr);
}

void ObjectEncoder::backward(const EncoderCache& cache, const nn::Segments& segments,
                             const Matrix& dy) {
  Matrix d = final_norm_.backward(cache.final_norm, head_.backward(cache.head, dy));
  for (std::size_t b = blocks_.size(); b-- > 0;) d = blocks_[b].backward(cache.blocks[b], segments, d);
  input_proj_.backward(cache.input, d);
}

nn::ParameterSet ObjectEncoder::parameters() {
  nn::ParameterSet set;
  input_proj_.collect(set, "encoder.input");
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    blocks_[b].collect(set, "encoder.block" + std::to_string(b));
  }
  final_norm_.collect(set, "encoder.norm");
  head_.collect(set, "encoder.head");
  return set;
}

double ObjectEncoder::flops(int length) const {
  nn::FlopCounter fc;
  const double t = length, d = config_.model_dim;
  fc.linear(t, config_.input_dim, d);
  for (int b = 0; b < config_.depth; ++b) {
    fc.linear(4 * t, d, d);
    fc.attention(t, t, d);
    fc.linear(t, d, config_.mlp_hidden);
    fc.linear(t, config_.mlp_hidden, d);
  }
  fc.linear(t, d, config_.head_hidden);
  fc.linear(t, config_.head_hidden, config_.head_hidden);
  fc.linear(t, config_.head_hidden, config_.embed_dim);
  return fc.flops;
}

// -------------------------------------------------------------- Predictor

nn::Segments query_segments(std::span<const std::vector<int>> masked) {
  std::vector<int> lengths;
  lengths.reserve(masked.size());
  for (const auto& m : masked) lengths.push_back(static_cast<int>(m.size()));
  return nn::Segments::from_lengths(lengths);
}

Predictor::Predictor(int embed_dim, const PredictorConfig& config, Rng& rng)
    : embed_dim_(embed_dim), config_(config), mask_token_(1, embed_dim) {
  config.validate(embed_dim);
  std::normal_distribution<double> init(0.0, 0.02);
  for (Eigen::Index i = 0; i < mask_token_.value.size(); ++i) mask_token_.value.data()[i] = init(rng);
  for (int i = 0; i < config.depth; ++i) {
    blocks_.emplace_back(embed_dim, config.n_heads, config.mlp_hidden, rng);
  }
  final_norm_ = nn::LayerNorm(embed_dim);
  out_proj_ = nn::Linear(embed_dim, embed_dim, rng);
}

Matrix Predictor::mask_tokens(std::span<const std::vector<int>> masked) const {
  std::vector<int> positions;
  for (const auto& m : masked) positions.insert(positions.end(), m.begin(), m.end());
  Matrix q = nn::sinusoidal_rows(positions, embed_dim_);
  q.rowwise() += mask_token_.value.row(0);
  return q;
}

Matrix Predictor::forward(const Matrix& context, const nn::Segments& context_segments,
                          std::span<const std::vector<int>> masked, PredictorCache* cache) const {
  if (masked.size() != context_segments.count()) {
    throw Error("predictor: one masked index set per sequence required");
  }
  if (context.cols() != embed_dim_) throw Error("predictor: context width mismatch");
  for (std::size_t s = 0; s < masked.size(); ++s) {
    if (masked[s].empty()) throw Error("predictor: empty masked index set");
    for (int t : masked[s]) {
      if (t < 0 || t >= context_segments.length[s]) {
        throw Error("predictor: masked index " + std::to_string(t) + " out of range for length " +
                    std::to_string(context_segments.length[s]));
      }
    }
  }
  const nn::Segments qseg = query_segments(masked);
  Matrix q = mask_tokens(masked);
  if (cache) cache->blocks.resize(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    q = blocks_[b].forward(q, qseg, context, context_segments, cache ? &cache->blocks[b] : nullptr);
  }
  q = final_norm_.forward(q, cache ? &cache->final_norm : nullptr);
  if (cache) cache->out_input = q;
  return out_proj_.forward(q);
}

Matrix Predictor::backward(const PredictorCache& cache, const nn::Segments& context_segments,
                           std::span<const std::vector<int>> masked, const Matrix& dy) {
  const nn::Segments qseg = query_segments(masked);
  Matrix dq = final_norm_.backward(cache.final_norm, out_proj_.backward(cache.out_input, dy));
  Matrix dcontext = Matrix::Zero(context_segments.total_rows(), embed_dim_);
  for (std::size_t b = blocks_.size(); b-- > 0;) {
    auto g = blocks_[b].backward(cache.blocks[b], qseg, context_segments, dq);
    dq = std::move(g.queries);
    dcontext += g.memory;
  }
  mask_token_.grad += dq.colwise().sum();
  return dcontext;
}

nn::ParameterSet Predictor::parameters() {
  nn::ParameterSet set;
  set.add("predictor.mask_token", mask_token_);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    blocks_[b].collect(set, "predictor.block" + std::to_string(b));
  }
  final_norm_.collect(set, "predictor.norm");
  out_proj_.collect(set, "predictor.out");
  return set;
}

double Predictor::flops(int length, int n_masked) const {
  nn::FlopCounter fc;
  const double m = n_masked, t = length, d = embed_dim_;
  for (int b = 0; b < config_.depth; ++b) {
    fc.linear(4 * m, d, d);
    fc.attention(m, m, d);
    fc.linear(2 * m, d, d);  // cross-attention q and output projections
    fc.linear(2 * t, d, d);  // cross-attention k and v projections
    fc.attention(m, t, d);
    fc.linear(m, d, config_.mlp_hidden);
    fc.linear(m, config_.mlp_hidden, d);
  }
  fc.linear(m, d, d);
  return fc.flops;
}

}  // namespace jepamon::jepa
