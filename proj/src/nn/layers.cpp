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

#include "jepamon/nn/layers.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "jepamon/errors.hpp"

namespace jepamon::nn {

Segments Segments::from_lengths(std::span<const int> lengths) {
  Segments s;
  int off = 0;
  for (int len : lengths) {
    if (len < 1) throw Error("segment length must be positive");
    s.offset.push_back(off);
    s.length.push_back(len);
    off += len;
  }
  return s;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in, int out, Rng& rng) : weight(in, out), bias(1, out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < weight.value.size(); ++i) weight.value.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < bias.value.size(); ++i) bias.value.data()[i] = u(rng);
}

Matrix Linear::forward(const Matrix& x) const {
  if (x.cols() != weight.value.rows()) {
    throw Error("linear: input has " + std::to_string(x.cols()) + " columns, expected " +
                std::to_string(weight.value.rows()));
  }
  Matrix y(x.rows(), weight.value.cols());
  y.noalias() = x * weight.value;
  y.rowwise() += bias.value.row(0);
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& dy) {
  weight.grad.noalias() += x.transpose() * dy;
  bias.grad += dy.colwise().sum();
  Matrix dx(dy.rows(), weight.value.rows());
  dx.noalias() = dy * weight.value.transpose();
  return dx;
}

void Linear::collect(ParameterSet& set, const std::string& prefix) {
  set.add(prefix + ".weight", weight);
  set.add(prefix + ".bias", bias);
}

// ------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(int dim) : gain(1, dim), bias(1, dim) { gain.value.setOnes(); }

Matrix LayerNorm::forward(const Matrix& x, LayerNormCache* cache) const {
  const Eigen::Index n = x.rows();
  const double inv_dim = 1.0 / static_cast<double>(x.cols());
  Matrix normalized(n, x.cols());
  Vector inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = x.row(r).sum() * inv_dim;
    const auto centered = x.row(r).array() - mean;
    const double var = centered.square().sum() * inv_dim;
    inv_std(r) = 1.0 / std::sqrt(var + kEpsilon);
    normalized.row(r) = centered * inv_std(r);
  }
  Matrix y = normalized.array().rowwise() * gain.value.row(0).array();
  y.rowwise() += bias.value.row(0);
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix LayerNorm::backward(const LayerNormCache& cache, const Matrix& dy) {
  const Matrix& xhat = cache.normalized;
  gain.grad += (dy.array() * xhat.array()).colwise().sum().matrix();
  bias.grad += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.value.row(0).array();
  const double dim = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double sum_d = dxhat.row(r).sum();
    const double sum_dx = dxhat.row(r).dot(xhat.row(r));
    dx.row(r) = (cache.inv_std(r) / dim) *
                (dim * dxhat.row(r).array() - sum_d - xhat.row(r).array() * sum_dx);
  }
  return dx;
}

void LayerNorm::collect(ParameterSet& set, const std::string& prefix) {
  set.add(prefix + ".gain", gain);
  set.add(prefix + ".bias", bias);
}

// ------------------------------------------------------------------ GELU

namespace {

using RowArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kGeluA = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluB = 0.044715;

// tanh(a (x + b x^3)) through the vectorized exponential:
// tanh(u) = 1 - 2 / (exp(2u) + 1).
RowArray gelu_tanh(const Matrix& x) {
  const RowArray v = x.array();
  const RowArray u = kGeluA * (v + kGeluB * v.cube());
  return 1.0 - 2.0 / ((2.0 * u).exp() + 1.0);
}

}  // namespace

Matrix gelu(const Matrix& x) {
  return (0.5 * x.array() * (1.0 + gelu_tanh(x))).matrix();
}

Matrix gelu_backward(const Matrix& x, const Matrix& dy) {
  const RowArray t = gelu_tanh(x);
  const RowArray v = x.array();
  const RowArray d =
      0.5 * (1.0 + t) + 0.5 * v * (1.0 - t.square()) * kGeluA * (1.0 + 3.0 * kGeluB * v.square());
  return (d * dy.array()).matrix();
}

// ------------------------------------------------------------- Attention

namespace {

// Row softmax over valid keys only; rows without any valid key attend to the
// key at their own index.
void softmax_masked(Matrix& p, std::span<const std::uint8_t> valid) {
  const Eigen::Index lk = p.cols();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < lk; ++j) {
      if (valid[j]) row_max = std::max(row_max, p(i, j));
    }
    if (row_max == -std::numeric_limits<double>::infinity()) {
      p.row(i).setZero();
      p(i, std::min(i, lk - 1)) = 1.0;
      continue;
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j < lk; ++j) {
      const double e = valid[j] ? std::exp(p(i, j) - row_max) : 0.0;
      p(i, j) = e;
      total += e;
    }
    p.row(i) /= total;
  }
}

// P = scale * Q_h K_h^T for one head of one segment. HD > 0 fixes the head
// width at compile time; HD == 0 reads it from `head_dim`.
template <int HD>
void head_scores_impl(const Matrix& q, int q0, const Matrix& k, int k0, int c0, int head_dim,
                      double scale, Matrix& p) {
  if constexpr (HD > 0) head_dim = HD;
  const Eigen::Index qs = q.cols(), ks = k.cols();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double* qi = q.data() + (q0 + i) * qs + c0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double* kj = k.data() + (k0 + j) * ks + c0;
      double acc = 0.0;
      for (int c = 0; c < head_dim; ++c) acc += qi[c] * kj[c];
      p(i, j) = acc * scale;
    }
  }
}

// out_h = P V_h, written into columns [c0, c0 + head_dim) of `out`.
template <int HD>
void head_mix_impl(const Matrix& p, const Matrix& v, int k0, int c0, int head_dim, Matrix& out,
                   int q0) {
  if constexpr (HD > 0) head_dim = HD;
  const Eigen::Index vs = v.cols(), os = out.cols();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double* oi = out.data() + (q0 + i) * os + c0;
    for (int c = 0; c < head_dim; ++c) oi[c] = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double pij = p(i, j);
      const double* vj = v.data() + (k0 + j) * vs + c0;
      for (int c = 0; c < head_dim; ++c) oi[c] += pij * vj[c];
    }
  }
}

void head_scores(const Matrix& q, int q0, const Matrix& k, int k0, int c0, int head_dim,
                 double scale, Matrix& p) {
  switch (head_dim) {
    case 4:
      return head_scores_impl<4>(q, q0, k, k0, c0, head_dim, scale, p);
    case 8:
      return head_scores_impl<8>(q, q0, k, k0, c0, head_dim, scale, p);
    default:
      return head_scores_impl<0>(q, q0, k, k0, c0, head_dim, scale, p);
  }
}

void head_mix(const Matrix& p, const Matrix& v, int k0, int c0, int head_dim, Matrix& out,
              int q0) {
  switch (head_dim) {
    case 4:
      return head_mix_impl<4>(p, v, k0, c0, head_dim, out, q0);
    case 8:
      return head_mix_impl<8>(p, v, k0, c0, head_dim, out, q0);
    default:
      return head_mix_impl<0>(p, v, k0, c0, head_dim, out, q0);
  }
}

// Row softmax; rows of a row-major matrix are contiguous, so exp vectorizes.
void softmax_rows(Matrix& p) {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    auto row = p.row(i).array();
    row = (row - row.maxCoeff()).exp();
    row /= row.sum();
  }
}

}  // namespace

MultiHeadAttention::MultiHeadAttention(int dim, int n_heads, Rng& rng)
    : wq(dim, dim, rng), wk(dim, dim, rng), wv(dim, dim, rng), wo(dim, dim, rng),
      dim_(dim), n_heads_(n_heads) {
  if (n_heads < 1 || dim % n_heads != 0) {
    throw Error("attention: dim " + std::to_string(dim) + " not divisible by " +
                std::to_string(n_heads) + " heads");
  }
}

Matrix MultiHeadAttention::forward(const Matrix& query_in, const Segments& query_segments,
                                   const Matrix& kv_in, const Segments& kv_segments,
                                   std::span<const std::uint8_t> key_valid,
                                   AttentionCache* cache) const {
  if (query_segments.count() != kv_segments.count()) {
    throw Error("attention: query and key/value segment counts differ");
  }
  if (query_in.rows() != query_segments.total_rows() || kv_in.rows() != kv_segments.total_rows()) {
    throw Error("attention: segment layout does not match input rows");
  }
  if (!key_valid.empty() && static_cast<int>(key_valid.size()) != kv_segments.total_rows()) {
    throw Error("attention: key mask length does not match key rows");
  }
  Matrix q = wq.forward(query_in);
  Matrix k = wk.forward(kv_in);
  Matrix v = wv.forward(kv_in);
  const int head_dim = dim_ / n_heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Matrix heads(query_in.rows(), dim_);
  std::vector<Matrix> probs;
  if (cache) probs.reserve(query_segments.count() * n_heads_);

  for (std::size_t s = 0; s < query_segments.count(); ++s) {
    const int q0 = query_segments.offset[s], lq = query_segments.length[s];
    const int k0 = kv_segments.offset[s], lk = kv_segments.length[s];
    for (int h = 0; h < n_heads_; ++h) {
      const int c0 = h * head_dim;
      Matrix p(lq, lk);
      head_scores(q, q0, k, k0, c0, head_dim, scale, p);
      if (key_valid.empty()) {
        softmax_rows(p);
      } else {
        softmax_masked(p, key_valid.subspan(k0, lk));
      }
      head_mix(p, v, k0, c0, head_dim, heads, q0);
      if (cache) probs.push_back(std::move(p));
    }
  }
  Matrix y = wo.forward(heads);
  if (cache) {
    cache->query_in = query_in;
    cache->kv_in = kv_in;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->heads = std::move(heads);
    cache->probs = std::move(probs);
  }
  return y;
}

MultiHeadAttention::InputGrads MultiHeadAttention::backward(const AttentionCache& cache,
                                                            const Segments& query_segments,
                                                            const Segments& kv_segments,
                                                            const Matrix& dy) {
  const Matrix dheads = wo.backward(cache.heads, dy);
  const int head_dim = dim_ / n_heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Matrix dq = Matrix::Zero(cache.q.rows(), dim_);
  Matrix dk = Matrix::Zero(cache.k.rows(), dim_);
  Matrix dv = Matrix::Zero(cache.v.rows(), dim_);

  for (std::size_t s = 0; s < query_segments.count(); ++s) {
    const int q0 = query_segments.offset[s], lq = query_segments.length[s];
    const int k0 = kv_segments.offset[s], lk = kv_segments.length[s];
    for (int h = 0; h < n_heads_; ++h) {
      const int c0 = h * head_dim;
      const Matrix& p = cache.probs[s * n_heads_ + h];
      // dV = P^T dOut, dP = dOut V^T.
      Matrix dp(lq, lk);
      for (int i = 0; i < lq; ++i) {
        const double* dout = dheads.data() + (q0 + i) * dim_ + c0;
        for (int j = 0; j < lk; ++j) {
          const double* vj = cache.v.data() + (k0 + j) * dim_ + c0;
          double* dvj = dv.data() + (k0 + j) * dim_ + c0;
          const double pij = p(i, j);
          double acc = 0.0;
          for (int c = 0; c < head_dim; ++c) {
            acc += dout[c] * vj[c];
            dvj[c] += pij * dout[c];
          }
          dp(i, j) = acc;
        }
      }
      // Softmax Jacobian: dS = P * (dP - rowsum(dP * P)), then dQ = dS K, dK = dS^T Q.
      for (int i = 0; i < lq; ++i) {
        double inner = 0.0;
        for (int j = 0; j < lk; ++j) inner += dp(i, j) * p(i, j);
        const double* qi = cache.q.data() + (q0 + i) * dim_ + c0;
        double* dqi = dq.data() + (q0 + i) * dim_ + c0;
        for (int j = 0; j < lk; ++j) {
          const double ds = p(i, j) * (dp(i, j) - inner) * scale;
          if (ds == 0.0) continue;
          const double* kj = cache.k.data() + (k0 + j) * dim_ + c0;
          double* dkj = dk.data() + (k0 + j) * dim_ + c0;
          for (int c = 0; c < head_dim; ++c) {
            dqi[c] += ds * kj[c];
            dkj[c] += ds * qi[c];
          }
        }
      }
    }
  }
  InputGrads g;
  g.query = wq.backward(cache.query_in, dq);
  g.kv = wk.backward(cache.kv_in, dk);
  g.kv += wv.backward(cache.kv_in, dv);
  return g;
}

void MultiHeadAttention::collect(ParameterSet& set, const std::string& prefix) {
  wq.collect(set, prefix + ".q");
  wk.collect(set, prefix + ".k");
  wv.collect(set, prefix + ".v");
  wo.collect(set, prefix + ".out");
}

// ---------------------------------------------------- Positional encoding

Matrix sinusoidal_rows(std::span<const int> positions, int dim) {
  Matrix table(static_cast<Eigen::Index>(positions.size()), dim);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    for (int c = 0; c < dim; ++c) {
      const int pair = c / 2;
      const double freq = std::pow(10000.0, -2.0 * pair / static_cast<double>(dim));
      const double angle = positions[r] * freq;
      table(static_cast<Eigen::Index>(r), c) = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return table;
}

Matrix sinusoidal_positions(int length, int dim) {
  std::vector<int> pos(length);
  for (int i = 0; i < length; ++i) pos[i] = i;
  return sinusoidal_rows(pos, dim);
}

}  // namespace jepamon::nn
