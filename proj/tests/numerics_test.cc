// Copyright 2026 The cfx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cfx/autodiff.h"
#include "cfx/error.h"
#include "cfx/grad_check.h"
#include "cfx/random.h"
#include "cfx/tensor.h"

namespace cfx {
namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * standard_normal(rng);
  return t;
}

TEST(Tensor, MatmulMatchesTripleLoop) {
  Rng rng(3);
  const Tensor a = random_tensor(4, 5, rng), b = random_tensor(5, 3, rng);
  const Tensor c = matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 5; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(c(i, j), s, 1e-13);
    }
}

TEST(Tensor, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Tensor(2, 3), Tensor(2, 3)), ShapeError);
  Tensor a(2, 2);
  EXPECT_THROW(a.add_scaled(Tensor(3, 2)), ShapeError);
}

TEST(Tensor, RequireFiniteRejectsNan) {
  Tensor a(1, 2);
  a[1] = std::nan("");
  EXPECT_FALSE(a.all_finite());
  EXPECT_THROW(require_finite(a, "test"), NumericError);
}

TEST(Autodiff, CrossEntropyOfEqualLogitsIsLn2) {
  Tape t;
  Var logits = t.constant(Tensor::row({0.0, 0.0}));
  const int target = 0;
  Var loss = cross_entropy(t, logits, std::span<const int>(&target, 1));
  EXPECT_NEAR(t.value(loss)[0], std::log(2.0), 1e-15);
}

TEST(Autodiff, SoftmaxSumsToOneForLargeLogits) {
  const auto p = softmax(std::vector<double>{1000.0, 999.0, -1000.0});
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-15);
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(GradCheck, SquaredNormHasGradientTwoX) {
  Rng rng(1);
  const Tensor x = random_tensor(3, 4, rng);
  const double err = grad_check([](Tape& t, Var v) { return sum_squares(t, v); }, x);
  EXPECT_LT(err, 1e-8);
  Tape t;
  Var v = t.variable(x);
  t.backward(sum_squares(t, v));
  const Tensor g = t.grad(v);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(g[i], 2.0 * x[i]);
}

TEST(GradCheck, RejectsNonPositiveStep) {
  EXPECT_THROW(grad_check([](Tape& t, Var v) { return sum_squares(t, v); }, Tensor(1, 1), 0.0),
               ConfigError);
}

// Each op composed into a scalar through sum_squares of a fixed projection so
// gradients are not trivially symmetric.
class OpGradient : public ::testing::Test {
 protected:
  Rng rng{11};
  Tensor w = random_tensor(4, 3, rng);
  Var head(Tape& t, Var x) {
    Var p = matmul(t, x, t.constant(w));
    return sum_squares(t, p);
  }
};

TEST_F(OpGradient, Matmul) {
  const Tensor b = random_tensor(4, 4, rng);
  EXPECT_LT(grad_check([&](Tape& t, Var x) { return head(t, matmul(t, x, t.constant(b))); },
                       random_tensor(3, 4, rng)),
            1e-7);
}

TEST_F(OpGradient, TransposeAndAdd) {
  const Tensor b = random_tensor(3, 4, rng);
  EXPECT_LT(grad_check(
                [&](Tape& t, Var x) {
                  return head(t, add(t, transpose(t, transpose(t, x)), t.constant(b)));
                },
                random_tensor(3, 4, rng)),
            1e-7);
}

TEST_F(OpGradient, AddRowBias) {
  const Tensor x0 = random_tensor(3, 4, rng);
  EXPECT_LT(grad_check([&](Tape& t, Var b) { return head(t, add_row(t, t.constant(x0), b)); },
                       random_tensor(1, 4, rng)),
            1e-7);
}

TEST_F(OpGradient, SoftmaxRows) {
  EXPECT_LT(grad_check([&](Tape& t, Var x) { return head(t, scale(t, softmax_rows(t, x), 3.0)); },
                       random_tensor(3, 4, rng)),
            1e-7);
}

TEST_F(OpGradient, LayerNormInputGainBias) {
  const Tensor x0 = random_tensor(3, 4, rng);
  const Tensor g0 = random_tensor(1, 4, rng), b0 = random_tensor(1, 4, rng);
  EXPECT_LT(grad_check(
                [&](Tape& t, Var x) {
                  return head(t, layer_norm(t, x, t.constant(g0), t.constant(b0)));
                },
                x0),
            1e-6);
  EXPECT_LT(grad_check(
                [&](Tape& t, Var g) {
                  return head(t, layer_norm(t, t.constant(x0), g, t.constant(b0)));
                },
                g0),
            1e-6);
}

TEST_F(OpGradient, Gelu) {
  EXPECT_LT(grad_check([&](Tape& t, Var x) { return head(t, gelu(t, x)); },
                       random_tensor(3, 4, rng)),
            1e-7);
}

TEST_F(OpGradient, EmbeddingLookupWithRepeats) {
  const std::vector<int> ids = {2, 0, 2};
  EXPECT_LT(grad_check([&](Tape& t, Var table) { return head(t, embedding_lookup(t, table, ids)); },
                       random_tensor(5, 4, rng)),
            1e-7);
}

TEST_F(OpGradient, SelectRowsAndConcat) {
  const std::vector<std::size_t> rows = {2, 0, 1};
  EXPECT_LT(grad_check(
                [&](Tape& t, Var x) {
                  Var a = select_rows(t, x, rows);
                  std::vector<Var> parts = {scale(t, a, 0.5), a};
                  Var c = concat_cols(t, parts);  // 3 x 4
                  return head(t, c);
                },
                random_tensor(3, 2, rng)),
            1e-7);
}

TEST(AutodiffGradient, CrossEntropy) {
  Rng rng(5);
  const std::vector<int> targets = {1, 0, 2};
  EXPECT_LT(grad_check([&](Tape& t, Var x) { return cross_entropy(t, x, targets); },
                       random_tensor(3, 3, rng)),
            1e-8);
}

TEST(Autodiff, DropoutKeepsExpectationAndZeroRateIsIdentity) {
  Rng rng(9);
  Tape t;
  Var x = t.constant(Tensor(1, 20000, 1.0));
  Var y = dropout(t, x, 0.25, rng);
  double s = 0;
  for (double v : t.value(y).values()) {
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-12);
    s += v;
  }
  EXPECT_NEAR(s / 20000.0, 1.0, 0.03);
  Var z = dropout(t, x, 0.0, rng);
  EXPECT_EQ(t.value(z), t.value(x));
}

TEST(Autodiff, GradientsAccumulateIntoParameterBuffer) {
  Tensor w = Tensor::row({1.0, -2.0});
  Tensor gw(1, 2);
  for (int rep = 0; rep < 2; ++rep) {
    Tape t;
    Var p = t.parameter(w, &gw);
    t.backward(sum_squares(t, p));
  }
  EXPECT_DOUBLE_EQ(gw[0], 4.0);
  EXPECT_DOUBLE_EQ(gw[1], -8.0);
}

TEST(Random, DeriveRngSeparatesSalts) {
  Rng a = derive_rng(1, {2, 3}), b = derive_rng(1, {3, 2}), c = derive_rng(1, {2, 3});
  const auto va = a(), vb = b(), vc = c();
  EXPECT_NE(va, vb);
  EXPECT_EQ(va, vc);
}

}  // namespace
}  // namespace cfx
