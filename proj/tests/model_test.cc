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
#include <vector>

#include <gtest/gtest.h>

#include "cfx/autodiff.h"
#include "cfx/error.h"
#include "cfx/grad_check.h"
#include "cfx/model.h"

namespace cfx {
namespace {

using Matrix = std::vector<std::vector<double>>;

Matrix to_matrix(const Tensor& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

Matrix mm(const Matrix& a, const Matrix& b) {
  Matrix c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// Straight-line scaled dot-product attention, one head at a time.
Matrix naive_attention(const Matrix& x, const AttentionParams& p) {
  const std::size_t n = x.size(), heads = p.wq.size();
  Matrix concat(n);
  for (std::size_t h = 0; h < heads; ++h) {
    const Matrix q = mm(x, to_matrix(p.wq[h]));
    const Matrix k = mm(x, to_matrix(p.wk[h]));
    const Matrix v = mm(x, to_matrix(p.wv[h]));
    const double dk = static_cast<double>(q[0].size());
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> s(n);
      double mx = -1e300;
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0;
        for (std::size_t c = 0; c < q[i].size(); ++c) dot += q[i][c] * k[j][c];
        s[j] = dot / std::sqrt(dk);
        mx = std::max(mx, s[j]);
      }
      double z = 0;
      for (auto& e : s) z += (e = std::exp(e - mx));
      for (std::size_t c = 0; c < v[0].size(); ++c) {
        double acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc += s[j] / z * v[j][c];
        concat[i].push_back(acc);
      }
    }
  }
  return mm(concat, to_matrix(p.wo));
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.d = 8;
  c.heads = 2;
  c.layers = 1;
  c.d_ff = 16;
  c.max_len = 8;
  c.vocab_size = 12;
  return c;
}

TEST(Attention, MatchesNaiveImplementation) {
  ModelConfig cfg = tiny_config();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const EncoderParams enc = init_encoder(cfg, rng);
    AttentionParams p = enc.layers[0].attention;
    // Larger weights than the init so the softmax is far from uniform.
    for (auto* group : {&p.wq, &p.wk, &p.wv})
      for (auto& w : *group)
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = standard_normal(rng);
    Tensor x(5, 8);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = standard_normal(rng);
    const Tensor got = multi_head_attention(x, p);
    const Matrix want = naive_attention(to_matrix(x), p);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(got(i, j), want[i][j], 1e-12);
  }
}

TEST(Attention, ProbabilitiesAreRowStochastic) {
  ModelConfig cfg = tiny_config();
  Rng rng(4);
  const EncoderParams enc = init_encoder(cfg, rng);
  Tensor x(6, 8);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = standard_normal(rng);
  std::vector<Tensor> probs;
  multi_head_attention(x, enc.layers[0].attention, &probs);
  ASSERT_EQ(probs.size(), 2u);
  for (const auto& p : probs)
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double s = 0;
      for (double v : p.row_span(r)) s += v;
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Model, FullClassifierLossPassesGradientCheck) {
  const ModelConfig cfg = tiny_config();
  ModelParams params = init_model(cfg, 7);
  // Scale the weights up so the check is not dominated by near-zero gradients.
  for (auto& [name, t] : params.named_tensors())
    if (name.find("ln") == std::string::npos)
      for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] *= 8.0;
  ModelParams grads = zeros_like(params);
  const std::vector<int> ids = with_cls(std::vector<int>{4, 7, 5, 11, 4});
  const int target = 1;
  std::vector<Tensor*> ps, gs;
  for (auto& [n, t] : params.named_tensors()) ps.push_back(t);
  for (auto& [n, t] : grads.named_tensors()) gs.push_back(t);
  const double err = grad_check(
      [&](Tape& t) {
        auto out = classifier_forward(t, params, &grads, ids);
        return cross_entropy(t, out.logits, std::span<const int>(&target, 1));
      },
      ps, gs);
  EXPECT_LT(err, 1e-4);
}

TEST(Model, PredictionFromLogits) {
  const Prediction p = prediction_from_logits({2.0, -1.0});
  EXPECT_EQ(p.label, Label::kCompleted);
  EXPECT_NEAR(p.probabilities[0], 1.0 / (1.0 + std::exp(-3.0)), 1e-15);
  EXPECT_FALSE(p.tie);
  const Prediction t = prediction_from_logits({0.5, 0.5});
  EXPECT_TRUE(t.tie);
  EXPECT_EQ(t.label, Label::kCompleted);
}

TEST(Model, InitIsDeterministicAndConfigValidated) {
  const ModelConfig cfg = tiny_config();
  const ModelParams a = init_model(cfg, 3), b = init_model(cfg, 3);
  EXPECT_EQ(a.cls_w, b.cls_w);
  EXPECT_EQ(a.encoder.token_embedding, b.encoder.token_embedding);
  ModelConfig bad = cfg;
  bad.heads = 3;  // 8 is not divisible by 3
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Model, EmptyAndOverlongInputsRejected) {
  const ModelParams p = init_model(tiny_config(), 1);
  EXPECT_THROW(encode_ids(std::vector<int>{}, p), InputError);
  EXPECT_THROW(encode_ids(std::vector<int>(9, 5), p), InputError);
  EXPECT_THROW(encode_ids(std::vector<int>{99}, p), InputError);
}

TEST(Model, OverrideWithOwnEmbeddingsReproducesLogits) {
  const ModelParams p = init_model(tiny_config(), 2);
  const std::vector<int> ids = {4, 6, 8};
  const Tensor e = summed_embeddings(p.encoder, with_cls(ids));
  TokenSequence doc;
  doc.ids = ids;
  doc.surface = {"a", "b", "c"};
  const auto plain = encode(doc, p);
  const auto over = encode(doc, p, &e);
  ASSERT_EQ(plain.size(), 2u);
  EXPECT_DOUBLE_EQ(plain[0], over[0]);
  EXPECT_DOUBLE_EQ(plain[1], over[1]);
}

TEST(Model, ForwardIsDeterministicWithoutDropout) {
  const ModelParams p = init_model(tiny_config(), 2);
  const std::vector<int> ids = {4, 6, 8, 9};
  EXPECT_EQ(encode_ids(ids, p), encode_ids(ids, p));
}

}  // namespace
}  // namespace cfx
