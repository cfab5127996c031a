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

#include <gtest/gtest.h>

#include <sstream>

#include "jepamon/errors.hpp"
#include "jepamon/jepa/model.hpp"
#include "jepamon/nn/layers.hpp"
#include "jepamon/nn/optim.hpp"
#include "jepamon/nn/transformer.hpp"
#include "test_util.hpp"

namespace jepamon::nn {
namespace {

using testing::flat;
using testing::grad_check;
using testing::kGradTolerance;
using testing::pointers;
using testing::random_matrix;

double weighted(const Matrix& y, const Matrix& w) { return (y.array() * w.array()).sum(); }

// Appends parameter coordinates and gradients to the check lists.
void add_params(const ParameterSet& set, std::vector<double*>& coords, std::vector<double>& analytic) {
  auto p = set.value_pointers();
  auto g = set.flat_grads();
  coords.insert(coords.end(), p.begin(), p.end());
  analytic.insert(analytic.end(), g.begin(), g.end());
}

TEST(Linear, GradientsMatchFiniteDifferences) {
  Rng rng(1);
  Linear lin(3, 4, rng);
  Matrix x = random_matrix(5, 3, rng);
  const Matrix w = random_matrix(5, 4, rng);
  ParameterSet ps;
  lin.collect(ps, "lin");
  ps.zero_grad();
  const Matrix dx = lin.backward(x, w);
  std::vector<double*> coords = pointers(x);
  std::vector<double> analytic = flat(dx);
  add_params(ps, coords, analytic);
  const auto r = grad_check([&] { return weighted(lin.forward(x), w); }, coords, analytic);
  EXPECT_TRUE(r.passed(kGradTolerance)) << r.max_rel_error;
  EXPECT_EQ(r.checked, coords.size());
}

TEST(Linear, ForwardIsAffine) {
  Rng rng(2);
  Linear lin(2, 3, rng);
  Matrix x(1, 2);
  x << 1.5, -2.0;
  const Matrix y = lin.forward(x);
  for (int j = 0; j < 3; ++j) {
    const double expect = 1.5 * lin.weight.value(0, j) - 2.0 * lin.weight.value(1, j) + lin.bias.value(0, j);
    EXPECT_NEAR(y(0, j), expect, 1e-14);
  }
}

TEST(LayerNorm, NormalizesRows) {
  LayerNorm ln(6);
  Rng rng(3);
  const Matrix x = random_matrix(4, 6, rng, 3.0);
  const Matrix y = ln.forward(x);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    EXPECT_NEAR(y.row(i).mean(), 0.0, 1e-12);
    const double var = (y.row(i).array() - y.row(i).mean()).square().mean();
    EXPECT_NEAR(var, 1.0, 1e-4);  // epsilon inside the square root
  }
}

TEST(LayerNorm, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  LayerNorm ln(6);
  ln.gain.value = random_matrix(1, 6, rng);
  ln.bias.value = random_matrix(1, 6, rng);
  Matrix x = random_matrix(4, 6, rng, 2.0);
  const Matrix w = random_matrix(4, 6, rng);
  ParameterSet ps;
  ln.collect(ps, "ln");
  ps.zero_grad();
  LayerNormCache cache;
  ln.forward(x, &cache);
  const Matrix dx = ln.backward(cache, w);
  std::vector<double*> coords = pointers(x);
  std::vector<double> analytic = flat(dx);
  add_params(ps, coords, analytic);
  const auto r = grad_check([&] { return weighted(ln.forward(x), w); }, coords, analytic);
  EXPECT_TRUE(r.passed(kGradTolerance)) << r.max_rel_error;
}

TEST(Gelu, ValuesAndGradient) {
  Matrix x(1, 5);
  x << -3.0, -0.5, 0.0, 0.5, 6.0;
  const Matrix y = gelu(x);
  EXPECT_DOUBLE_EQ(y(0, 2), 0.0);
  EXPECT_NEAR(y(0, 4), 6.0, 1e-6);
  EXPECT_NEAR(y(0, 0), 0.0, 1e-2);
  // tanh form at 0.5.
  const double a = 0.5 + 0.044715 * 0.125;
  EXPECT_NEAR(y(0, 3), 0.25 * (1.0 + std::tanh(std::sqrt(2.0 / std::numbers::pi) * a)), 1e-14);

  Rng rng(5);
  Matrix z = random_matrix(3, 4, rng, 2.0);
  const Matrix w = random_matrix(3, 4, rng);
  const Matrix dz = gelu_backward(z, w);
  const auto r = grad_check([&] { return weighted(gelu(z), w); }, pointers(z), flat(dz));
  EXPECT_TRUE(r.passed(kGradTolerance)) << r.max_rel_error;
}

struct AttentionCase {
  std::vector<int> q_lengths;
  std::vector<int> kv_lengths;
  int dim;
  int heads;
  bool with_mask;
};

class AttentionGrad : public ::testing::TestWithParam<AttentionCase> {};

TEST_P(AttentionGrad, MatchesFiniteDifferences) {
  const auto& c = GetParam();
  Rng rng(6);
  MultiHeadAttention attn(c.dim, c.heads, rng);
  const Segments qs = Segments::from_lengths(c.q_lengths);
  const Segments ks = Segments::from_lengths(c.kv_lengths);
  Matrix q = random_matrix(qs.total_rows(), c.dim, rng);
  Matrix kv = random_matrix(ks.total_rows(), c.dim, rng);
  std::vector<std::uint8_t> valid;
  if (c.with_mask) {
    valid.assign(static_cast<std::size_t>(ks.total_rows()), 1);
    valid[1] = 0;  // partially masked first segment
    for (int j = 0; j < ks.length.back(); ++j) valid[ks.offset.back() + j] = 0;  // fully masked last
  }
  const Matrix w = random_matrix(qs.total_rows(), c.dim, rng);
  ParameterSet ps;
  attn.collect(ps, "attn");
  ps.zero_grad();
  AttentionCache cache;
  attn.forward(q, qs, kv, ks, valid, &cache);
  const auto g = attn.backward(cache, qs, ks, w);
  std::vector<double*> coords = pointers(q);
  std::vector<double> analytic = flat(g.query);
  for (double* p : pointers(kv)) coords.push_back(p);
  for (double v : flat(g.kv)) analytic.push_back(v);
  add_params(ps, coords, analytic);
  const auto r = grad_check([&] { return weighted(attn.forward(q, qs, kv, ks, valid), w); }, coords, analytic);
  EXPECT_TRUE(r.passed(kGradTolerance)) << r.max_rel_error << " at " << r.worst_index;
}

INSTANTIATE_TEST_SUITE_P(Shapes, AttentionGrad,
                         ::testing::Values(AttentionCase{{4}, {4}, 8, 2, false},
                                           AttentionCase{{3, 5}, {4, 2}, 8, 2, false},
                                           AttentionCase{{2, 3}, {4, 3}, 12, 3, true},
                                           AttentionCase{{3}, {5}, 8, 1, false},
                                           AttentionCase{{2, 2}, {3, 3}, 40, 10, false}));

TEST(Attention, SegmentsDoNotInteract) {
  Rng rng(7);
  MultiHeadAttention attn(8, 2, rng);
  const Segments s = Segments::from_lengths(std::vector<int>{3, 4});
  Matrix x = random_matrix(7, 8, rng);
  const Matrix y0 = attn.forward(x, s, x, s);
  x.bottomRows(4) = random_matrix(4, 8, rng);
  const Matrix y1 = attn.forward(x, s, x, s);
  EXPECT_EQ(y0.topRows(3), y1.topRows(3));
}

TEST(Attention, MatchesSingleSequenceForward) {
  Rng rng(8);
  MultiHeadAttention attn(8, 4, rng);
  const Matrix a = random_matrix(3, 8, rng), b = random_matrix(5, 8, rng);
  Matrix packed(8, 8);
  packed << a, b;
  const Matrix y = attn.forward(packed, Segments::from_lengths(std::vector<int>{3, 5}), packed,
                                Segments::from_lengths(std::vector<int>{3, 5}));
  const Matrix ya = attn.forward(a, Segments::single(3), a, Segments::single(3));
  const Matrix yb = attn.forward(b, Segments::single(5), b, Segments::single(5));
  EXPECT_LT((y.topRows(3) - ya).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((y.bottomRows(5) - yb).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Attention, MaskedKeysGetNoWeight) {
  Rng rng(9);
  MultiHeadAttention attn(4, 1, rng);
  const Segments s = Segments::single(4);
  Matrix x = random_matrix(4, 4, rng);
  const std::vector<std::uint8_t> valid{1, 0, 1, 1};
  const Matrix y0 = attn.forward(x, s, x, s, valid);
  Matrix x2 = x;
  // Changing only the masked key row must not change other query outputs.
  x2.row(1) = random_matrix(1, 4, rng);
  Matrix y1 = attn.forward(x, s, x2, s, valid);
  EXPECT_LT((y0 - y1).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Attention, RejectsIndivisibleHeads) {
  Rng rng(1);
  EXPECT_THROW(MultiHeadAttention(10, 4, rng), Error);
}

TEST(Mlp, GradientsMatchFiniteDifferences) {
  Rng rng(10);
  const std::vector<int> widths{5, 7, 6, 3};
  Mlp mlp(widths, rng);
  Matrix x = random_matrix(4, 5, rng);
  const Matrix w = random_matrix(4, 3, rng);
  ParameterSet ps;
  mlp.collect(ps, "mlp");
  ps.zero_grad();
  MlpCache cache;
  mlp.forward(x, &cache);
  const Matrix dx = mlp.backward(cache, w);
  std::vector<double*> coords = pointers(x);
  std::vector<double> analytic = flat(dx);
  add_params(ps, coords, analytic);
  const auto r = grad_check([&] { return weighted(mlp.forward(x), w); }, coords, analytic);
  EXPECT_TRUE(r.passed(kGradTolerance)) << r.max_rel_error;
}

TEST(EncoderBlock, GradientsMatchFiniteDifferences) {
  Rng rng(11);
  EncoderBlock block(8, 2, 16, rng);
  const Segments s = Segments::from_lengths(std::vector<int>{3, 4});
  Matrix x = random_matrix(7, 8, rng);
  const Matrix w = random_matrix(7, 8, rng);
  ParameterSet ps;
  block.collect(ps, "b");
  ps.zero_grad();
  EncoderBlockCache cache;
  block.forward(x, s, {}, &cache);
  const Matrix dx = block.backward(cache, s, w);
  std::vector<double*> coords = pointers(x);
  std::vector<double> analytic = flat(dx);
  add_params(ps, coords, analytic);
  const auto r = grad_check([&] { return weighted(block.forward(x, s, {}), w); }, coords, analytic);
  EXPECT_TRUE(r.passed(kGradTolerance)) << r.max_rel_error;
}

TEST(DecoderBlock, GradientsMatchFiniteDifferences) {
  Rng rng(12);
  DecoderBlock block(8, 2, 16, rng);
  const Segments qs = Segments::from_lengths(std::vector<int>{2, 3});
  const Segments ms = Segments::from_lengths(std::vector<int>{4, 5});
  Matrix q = random_matrix(5, 8, rng);
  Matrix mem = random_matrix(9, 8, rng);
  const Matrix w = random_matrix(5, 8, rng);
  ParameterSet ps;
  block.collect(ps, "d");
  ps.zero_grad();
  DecoderBlockCache cache;
  block.forward(q, qs, mem, ms, &cache);
  const auto g = block.backward(cache, qs, ms, w);
  std::vector<double*> coords = pointers(q);
  std::vector<double> analytic = flat(g.queries);
  for (double* p : pointers(mem)) coords.push_back(p);
  for (double v : flat(g.memory)) analytic.push_back(v);
  add_params(ps, coords, analytic);
  const auto r = grad_check([&] { return weighted(block.forward(q, qs, mem, ms), w); }, coords, analytic);
  EXPECT_TRUE(r.passed(kGradTolerance)) << r.max_rel_error;
}

jepa::EncoderConfig small_encoder() {
  jepa::EncoderConfig c;
  c.model_dim = 8;
  c.n_heads = 2;
  c.depth = 2;
  c.mlp_hidden = 16;
  c.head_hidden = 12;
  c.embed_dim = 4;
  return c;
}

TEST(ObjectEncoder, GradientsMatchFiniteDifferences) {
  Rng rng(13);
  jepa::ObjectEncoder enc(small_encoder(), rng);
  const Segments s = Segments::from_lengths(std::vector<int>{8, 9});
  const Matrix x = random_matrix(17, 5, rng);
  const Matrix w = random_matrix(17, 4, rng);
  ParameterSet ps = enc.parameters();
  ps.zero_grad();
  jepa::EncoderCache cache;
  enc.forward(x, s, &cache);
  enc.backward(cache, s, w);
  std::vector<double*> coords;
  std::vector<double> analytic;
  add_params(ps, coords, analytic);
  const auto r = grad_check([&] { return weighted(enc.forward(x, s), w); }, coords, analytic);
  EXPECT_TRUE(r.passed(kGradTolerance)) << r.max_rel_error;
}

TEST(Predictor, GradientsMatchFiniteDifferences) {
  Rng rng(14);
  jepa::PredictorConfig pc;
  pc.n_heads = 2;
  pc.depth = 2;
  pc.mlp_hidden = 8;
  jepa::Predictor pred(4, pc, rng);
  const Segments s = Segments::from_lengths(std::vector<int>{8, 9});
  const std::vector<std::vector<int>> masked{{1, 5}, {0, 3, 8}};
  Matrix ctx = random_matrix(17, 4, rng);
  const Matrix w = random_matrix(5, 4, rng);
  ParameterSet ps = pred.parameters();
  ps.zero_grad();
  jepa::PredictorCache cache;
  pred.forward(ctx, s, masked, &cache);
  const Matrix dctx = pred.backward(cache, s, masked, w);
  std::vector<double*> coords = pointers(ctx);
  std::vector<double> analytic = flat(dctx);
  add_params(ps, coords, analytic);
  const auto r = grad_check([&] { return weighted(pred.forward(ctx, s, masked), w); }, coords, analytic);
  EXPECT_TRUE(r.passed(kGradTolerance)) << r.max_rel_error;
}

TEST(Predictor, RejectsOutOfRangeIndices) {
  Rng rng(15);
  jepa::Predictor pred(4, {2, 1, 8}, rng);
  const Matrix ctx = random_matrix(8, 4, rng);
  const std::vector<std::vector<int>> masked{{8}};
  EXPECT_THROW(pred.forward(ctx, Segments::single(8), masked), Error);
}

TEST(Positional, SinusoidalTable) {
  const Matrix p = sinusoidal_positions(5, 6);
  for (int t = 0; t < 5; ++t) {
    for (int i = 0; i < 3; ++i) {
      const double angle = t / std::pow(10000.0, 2.0 * i / 6.0);
      EXPECT_NEAR(p(t, 2 * i), std::sin(angle), 1e-15);
      EXPECT_NEAR(p(t, 2 * i + 1), std::cos(angle), 1e-15);
    }
  }
  const std::vector<int> pos{3, 0};
  const Matrix r = sinusoidal_rows(pos, 6);
  EXPECT_EQ(r.row(0), p.row(3));
  EXPECT_EQ(r.row(1), p.row(0));
}

TEST(L1Loss, ValueAndSubgradient) {
  Matrix pred(2, 2), target(2, 2);
  pred << 1.0, 2.0, 3.0, -1.0;
  target << 0.0, 2.0, 5.0, -1.5;
  const auto r = l1_loss(pred, target);
  EXPECT_DOUBLE_EQ(r.loss, (1.0 + 0.0 + 2.0 + 0.5) / 4.0);
  EXPECT_DOUBLE_EQ(r.grad(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(r.grad(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(r.grad(1, 0), -0.25);
  EXPECT_DOUBLE_EQ(r.grad(1, 1), 0.25);
}

TEST(Adam, MatchesHandComputedSteps) {
  Parameter p(1, 2);
  p.value << 1.0, -2.0;
  ParameterSet ps;
  ps.add("p", p);
  AdamState st;
  st.learning_rate = 0.1;
  const double g1[2] = {0.5, -1.0}, g2[2] = {0.2, 0.3};
  double m[2] = {0, 0}, v[2] = {0, 0}, x[2] = {1.0, -2.0};
  for (int step = 1; step <= 2; ++step) {
    const double* g = step == 1 ? g1 : g2;
    p.grad << g[0], g[1];
    adam_step(ps, st);
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, step));
      const double vh = v[i] / (1 - std::pow(0.999, step));
      x[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      EXPECT_NEAR(p.value(0, i), x[i], 1e-15);
    }
  }
  EXPECT_EQ(st.step, 2);
}

TEST(TensorArchive, RoundTripsExactly) {
  Rng rng(16);
  std::vector<NamedTensor> t{{"a", random_matrix(3, 2, rng)}, {"bias", random_matrix(1, 5, rng)}};
  t[0].value(0, 0) = -0.0;
  t[0].value(1, 1) = 1e-310;
  std::stringstream ss;
  write_tensors(ss, t);
  const auto back = read_tensors(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].name, "a");
  EXPECT_EQ(back[0].value, t[0].value);
  EXPECT_EQ(back[1].value, t[1].value);
  EXPECT_TRUE(std::signbit(back[0].value(0, 0)));
}

TEST(TensorArchive, RejectsBadMagicAndTruncation) {
  std::stringstream bad("NOTANARCHIVE");
  EXPECT_THROW(read_tensors(bad), Error);
  Rng rng(17);
  std::vector<NamedTensor> t{{"a", random_matrix(3, 3, rng)}};
  std::stringstream ss;
  write_tensors(ss, t);
  std::string s = ss.str();
  std::stringstream cut(s.substr(0, s.size() - 4));
  EXPECT_THROW(read_tensors(cut), Error);
}

TEST(ParameterSet, RejectsDuplicatesAndComparesLayouts) {
  Parameter a(2, 2), b(2, 2), c(2, 3);
  ParameterSet s1;
  s1.add("a", a);
  EXPECT_THROW(s1.add("a", b), Error);
  ParameterSet s2;
  s2.add("a", b);
  EXPECT_NO_THROW(check_same_layout(s1, s2));
  ParameterSet s3;
  s3.add("a", c);
  EXPECT_THROW(check_same_layout(s1, s3), SchemaError);
  EXPECT_EQ(s1.count(), 4u);
}

TEST(FiniteDifference, DetectsWrongGradient) {
  Matrix x(1, 2);
  x << 1.0, 2.0;
  auto coords = pointers(x);
  auto loss = [&] { return x(0, 0) * x(0, 0) + 3.0 * x(0, 1); };
  EXPECT_TRUE(grad_check(loss, coords, {2.0, 3.0}).passed(1e-8));
  EXPECT_FALSE(grad_check(loss, coords, {2.0, 3.1}).passed(1e-4));
  EXPECT_EQ(x(0, 0), 1.0);  // restored
}

}  // namespace
}  // namespace jepamon::nn
