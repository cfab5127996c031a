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

#include "jepamon/nn/transformer.hpp"

#include "jepamon/errors.hpp"

namespace jepamon::nn {

Mlp::Mlp(std::span<const int> widths, Rng& rng) {
  if (widths.size() < 2) throw Error("mlp: need at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers.emplace_back(widths[i], widths[i + 1], rng);
}

Matrix Mlp::forward(const Matrix& x, MlpCache* cache) const {
  if (cache) {
    cache->inputs.clear();
    cache->activations.clear();
  }
  Matrix h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Matrix out = layers[i].forward(h);
    if (cache) cache->inputs.push_back(std::move(h));
    if (i + 1 < layers.size()) {
      h = gelu(out);
      if (cache) cache->activations.push_back(std::move(out));
    } else {
      h = std::move(out);
    }
  }
  return h;
}

Matrix Mlp::backward(const MlpCache& cache, const Matrix& dy) {
  Matrix d = dy;
  for (std::size_t i = layers.size(); i-- > 0;) {
    d = layers[i].backward(cache.inputs[i], d);
    if (i > 0) d = gelu_backward(cache.activations[i - 1], d);
  }
  return d;
}

void Mlp::collect(ParameterSet& set, const std::string& prefix) {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(set, prefix + "." + std::to_string(i));
}

EncoderBlock::EncoderBlock(int dim, int n_heads, int mlp_hidden, Rng& rng)
    : ln1(dim), attn(dim, n_heads, rng), ln2(dim) {
  const int widths[] = {dim, mlp_hidden, dim};
  mlp = Mlp(widths, rng);
}

Matrix EncoderBlock::forward(const Matrix& x, const Segments& segments,
                             std::span<const std::uint8_t> key_valid,
                             EncoderBlockCache* cache) const {
  const Matrix h1 = ln1.forward(x, cache ? &cache->ln1 : nullptr);
  Matrix x1 = x + attn.forward(h1, segments, h1, segments, key_valid, cache ? &cache->attn : nullptr);
  const Matrix h2 = ln2.forward(x1, cache ? &cache->ln2 : nullptr);
  x1 += mlp.forward(h2, cache ? &cache->mlp : nullptr);
  return x1;
}

Matrix EncoderBlock::backward(const EncoderBlockCache& cache, const Segments& segments,
                              const Matrix& dy) {
  Matrix dx1 = dy + ln2.backward(cache.ln2, mlp.backward(cache.mlp, dy));
  const auto g = attn.backward(cache.attn, segments, segments, dx1);
  dx1 += ln1.backward(cache.ln1, g.query + g.kv);
  return dx1;
}

void EncoderBlock::collect(ParameterSet& set, const std::string& prefix) {
  ln1.collect(set, prefix + ".ln1");
  attn.collect(set, prefix + ".attn");
  ln2.collect(set, prefix + ".ln2");
  mlp.collect(set, prefix + ".mlp");
}

DecoderBlock::DecoderBlock(int dim, int n_heads, int mlp_hidden, Rng& rng)
    : ln1(dim), self_attn(dim, n_heads, rng), ln2(dim), cross_attn(dim, n_heads, rng), ln3(dim) {
  const int widths[] = {dim, mlp_hidden, dim};
  mlp = Mlp(widths, rng);
}

Matrix DecoderBlock::forward(const Matrix& queries, const Segments& query_segments,
                             const Matrix& memory, const Segments& memory_segments,
                             DecoderBlockCache* cache) const {
  const Matrix h1 = ln1.forward(queries, cache ? &cache->ln1 : nullptr);
  Matrix q = queries + self_attn.forward(h1, query_segments, h1, query_segments, {},
                                         cache ? &cache->self_attn : nullptr);
  const Matrix h2 = ln2.forward(q, cache ? &cache->ln2 : nullptr);
  q += cross_attn.forward(h2, query_segments, memory, memory_segments, {},
                          cache ? &cache->cross_attn : nullptr);
  const Matrix h3 = ln3.forward(q, cache ? &cache->ln3 : nullptr);
  q += mlp.forward(h3, cache ? &cache->mlp : nullptr);
  return q;
}

DecoderBlock::Grads DecoderBlock::backward(const DecoderBlockCache& cache,
                                           const Segments& query_segments,
                                           const Segments& memory_segments, const Matrix& dy) {
  Matrix dq = dy + ln3.backward(cache.ln3, mlp.backward(cache.mlp, dy));
  const auto gc = cross_attn.backward(cache.cross_attn, query_segments, memory_segments, dq);
  dq += ln2.backward(cache.ln2, gc.query);
  const auto gs = self_attn.backward(cache.self_attn, query_segments, query_segments, dq);
  dq += ln1.backward(cache.ln1, gs.query + gs.kv);
  return {std::move(dq), gc.kv};
}

void DecoderBlock::collect(ParameterSet& set, const std::string& prefix) {
  ln1.collect(set, prefix + ".ln1");
  self_attn.collect(set, prefix + ".self_attn");
  ln2.collect(set, prefix + ".ln2");
  cross_attn.collect(set, prefix + ".cross_attn");
  ln3.collect(set, prefix + ".ln3");
  mlp.collect(set, prefix + ".mlp");
}

}  // namespace jepamon::nn
