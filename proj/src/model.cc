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

#include "cfx/model.h"

#include <cmath>

#include "cfx/error.h"

namespace cfx {
namespace {

Tensor uniform_tensor(std::size_t r, std::size_t c, double bound, Rng& rng) {
  Tensor t(r, c);
  for (double& v : t.values()) v = uniform(rng, -bound, bound);
  return t;
}

Tensor normal_tensor(std::size_t r, std::size_t c, double stddev, Rng& rng) {
  Tensor t(r, c);
  for (double& v : t.values()) v = stddev * standard_normal(rng);
  return t;
}

Var param(Tape& t, const Tensor& v, Tensor* g) { return t.parameter(v, g); }

}  // namespace

void ModelConfig::validate() const {
  if (d == 0 || heads == 0 || layers == 0 || d_ff == 0 || max_len == 0 || n_classes == 0) {
    throw ConfigError("model dimensions must all be >= 1");
  }
  if (d % heads != 0) {
    throw ConfigError("model width " + std::to_string(d) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (vocab_size <= static_cast<std::size_t>(kNumSpecialTokens)) {
    throw ConfigError("vocabulary must contain more than the special tokens");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

void append_named(EncoderParams& p, const std::string& prefix, NamedTensors& out) {
  out.emplace_back(prefix + "token_embedding", &p.token_embedding);
  out.emplace_back(prefix + "position_embedding", &p.position_embedding);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& L = p.layers[l];
    const std::string lp = prefix + "layers." + std::to_string(l) + ".";
    for (std::size_t h = 0; h < L.attention.wq.size(); ++h) {
      const std::string hs = std::to_string(h);
      out.emplace_back(lp + "attention.wq." + hs, &L.attention.wq[h]);
      out.emplace_back(lp + "attention.wk." + hs, &L.attention.wk[h]);
      out.emplace_back(lp + "attention.wv." + hs, &L.attention.wv[h]);
    }
    out.emplace_back(lp + "attention.wo", &L.attention.wo);
    out.emplace_back(lp + "ln1.gain", &L.ln1_gain);
    out.emplace_back(lp + "ln1.bias", &L.ln1_bias);
    out.emplace_back(lp + "ff1.w", &L.ff1_w);
    out.emplace_back(lp + "ff1.b", &L.ff1_b);
    out.emplace_back(lp + "ff2.w", &L.ff2_w);
    out.emplace_back(lp + "ff2.b", &L.ff2_b);
    out.emplace_back(lp + "ln2.gain", &L.ln2_gain);
    out.emplace_back(lp + "ln2.bias", &L.ln2_bias);
  }
}

EncoderParams init_encoder(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  EncoderParams p;
  p.token_embedding = uniform_tensor(cfg.vocab_size, cfg.d, 0.05, rng);
  p.position_embedding = uniform_tensor(cfg.max_len + 1, cfg.d, 0.05, rng);
  const double attn_std = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    EncoderLayerParams L;
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      L.attention.wq.push_back(normal_tensor(cfg.d, cfg.head_dim(), attn_std, rng));
      L.attention.wk.push_back(normal_tensor(cfg.d, cfg.head_dim(), attn_std, rng));
      L.attention.wv.push_back(normal_tensor(cfg.d, cfg.head_dim(), attn_std, rng));
    }
    L.attention.wo = normal_tensor(cfg.d, cfg.d, attn_std, rng);
    L.ln1_gain = Tensor(1, cfg.d, 1.0);
    L.ln1_bias = Tensor(1, cfg.d);
    L.ff1_w = normal_tensor(cfg.d, cfg.d_ff, attn_std, rng);
    L.ff1_b = Tensor(1, cfg.d_ff);
    L.ff2_w = normal_tensor(cfg.d_ff, cfg.d, 1.0 / std::sqrt(static_cast<double>(cfg.d_ff)), rng);
    L.ff2_b = Tensor(1, cfg.d);
    L.ln2_gain = Tensor(1, cfg.d, 1.0);
    L.ln2_bias = Tensor(1, cfg.d);
    p.layers.push_back(std::move(L));
  }
  return p;
}

NamedTensors ModelParams::named_tensors() {
  NamedTensors out;
  append_named(encoder, "encoder.", out);
  out.emplace_back("classifier.w", &cls_w);
  out.emplace_back("classifier.b", &cls_b);
  return out;
}

ConstNamedTensors ModelParams::named_tensors() const {
  ConstNamedTensors out;
  for (auto& [name, t] : const_cast<ModelParams*>(this)->named_tensors()) out.emplace_back(name, t);
  return out;
}

ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams p;
  p.config = cfg;
  p.encoder = init_encoder(cfg, rng);
  p.cls_w = normal_tensor(cfg.d, cfg.n_classes, 1.0 / std::sqrt(static_cast<double>(cfg.d)), rng);
  p.cls_b = Tensor(1, cfg.n_classes);
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (auto& [name, t] : z.named_tensors()) t->fill(0.0);
  return z;
}

// ---------------------------------------------------------------------------

AttentionVars register_attention(Tape& t, const AttentionParams& p, AttentionParams* g) {
  AttentionVars v;
  for (std::size_t h = 0; h < p.wq.size(); ++h) {
    v.wq.push_back(param(t, p.wq[h], g ? &g->wq[h] : nullptr));
    v.wk.push_back(param(t, p.wk[h], g ? &g->wk[h] : nullptr));
    v.wv.push_back(param(t, p.wv[h], g ? &g->wv[h] : nullptr));
  }
  v.wo = param(t, p.wo, g ? &g->wo : nullptr);
  return v;
}

EncoderVars register_encoder(Tape& t, const EncoderParams& p, EncoderParams* g) {
  EncoderVars v;
  v.token_embedding = param(t, p.token_embedding, g ? &g->token_embedding : nullptr);
  v.position_embedding = param(t, p.position_embedding, g ? &g->position_embedding : nullptr);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& L = p.layers[l];
    EncoderLayerParams* G = g ? &g->layers[l] : nullptr;
    EncoderLayerVars lv;
    lv.attention = register_attention(t, L.attention, G ? &G->attention : nullptr);
    lv.ln1_gain = param(t, L.ln1_gain, G ? &G->ln1_gain : nullptr);
    lv.ln1_bias = param(t, L.ln1_bias, G ? &G->ln1_bias : nullptr);
    lv.ff1_w = param(t, L.ff1_w, G ? &G->ff1_w : nullptr);
    lv.ff1_b = param(t, L.ff1_b, G ? &G->ff1_b : nullptr);
    lv.ff2_w = param(t, L.ff2_w, G ? &G->ff2_w : nullptr);
    lv.ff2_b = param(t, L.ff2_b, G ? &G->ff2_b : nullptr);
    lv.ln2_gain = param(t, L.ln2_gain, G ? &G->ln2_gain : nullptr);
    lv.ln2_bias = param(t, L.ln2_bias, G ? &G->ln2_bias : nullptr);
    v.layers.push_back(std::move(lv));
  }
  return v;
}

Var multi_head_attention(Tape& t, Var x, const AttentionVars& p,
                         std::vector<Tensor>* attention_out) {
  const std::size_t d = t.value(x).cols();
  if (t.value(p.wo).rows() != d || p.wq.empty()) {
    throw ShapeError("multi_head_attention: input " + shape_to_string(t.value(x).shape()) +
                     " vs output projection " + shape_to_string(t.value(p.wo).shape()));
  }
  std::vector<Var> heads;
  heads.reserve(p.wq.size());
  for (std::size_t h = 0; h < p.wq.size(); ++h) {
    Var q = matmul(t, x, p.wq[h]);
    Var k = matmul(t, x, p.wk[h]);
    Var v = matmul(t, x, p.wv[h]);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(t.value(q).cols()));
    Var scores = scale(t, matmul(t, q, transpose(t, k)), inv_sqrt);
    Var probs = softmax_rows(t, scores);
    if (attention_out) attention_out->push_back(t.value(probs));
    heads.push_back(matmul(t, probs, v));
  }
  return matmul(t, concat_cols(t, heads), p.wo);
}

Tensor multi_head_attention(const Tensor& x, const AttentionParams& p,
                            std::vector<Tensor>* attention_out) {
  Tape t;
  AttentionVars v = register_attention(t, p, nullptr);
  Var out = multi_head_attention(t, t.constant(x), v, attention_out);
  return t.value(out);
}

std::vector<int> with_cls(std::span<const int> ids) {
  std::vector<int> out;
  out.reserve(ids.size() + 1);
  out.push_back(kCls);
  out.insert(out.end(), ids.begin(), ids.end());
  return out;
}

Tensor summed_embeddings(const EncoderParams& p, std::span<const int> ids_with_cls) {
  const std::size_t n = ids_with_cls.size();
  const std::size_t d = p.token_embedding.cols();
  if (n > p.position_embedding.rows()) throw InputError("sequence exceeds max_len");
  Tensor out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const int id = ids_with_cls[i];
    if (id < 0 || static_cast<std::size_t>(id) >= p.token_embedding.rows()) {
      throw InputError("token id " + std::to_string(id) + " out of range");
    }
    for (std::size_t c = 0; c < d; ++c) {
      out(i, c) = p.token_embedding(static_cast<std::size_t>(id), c) + p.position_embedding(i, c);
    }
  }
  return out;
}

EncoderOutput encoder_forward(Tape& t, const EncoderVars& vars, const ModelConfig& cfg,
                              std::span<const int> ids, const ForwardOptions& opts) {
  const std::size_t n = ids.size();
  if (n == 0) throw InputError("cannot encode an empty sequence");
  if (n > cfg.max_len + 1) {
    throw InputError("sequence of " + std::to_string(n) + " positions exceeds max_len");
  }
  Var emb;
  if (opts.embedding_override) {
    const Tensor& o = *opts.embedding_override;
    if (o.rows() != n || o.cols() != cfg.d) {
      throw ShapeError("embedding override " + shape_to_string(o.shape()) + " vs expected [" +
                       std::to_string(n) + "x" + std::to_string(cfg.d) + "]");
    }
    emb = t.variable(o);
  } else {
    std::vector<std::size_t> positions(n);
    for (std::size_t i = 0; i < n; ++i) positions[i] = i;
    Var tok = embedding_lookup(t, vars.token_embedding, ids);
    Var pos = select_rows(t, vars.position_embedding, positions);
    emb = add(t, tok, pos);
    if (opts.embedding_offset) emb = add(t, emb, t.constant(*opts.embedding_offset));
  }

  const bool drop = opts.dropout_rng && opts.dropout > 0.0;
  auto maybe_drop = [&](Var v) { return drop ? dropout(t, v, opts.dropout, *opts.dropout_rng) : v; };

  Var x = maybe_drop(emb);
  for (const auto& L : vars.layers) {
    Var attn = maybe_drop(multi_head_attention(t, x, L.attention, opts.attention_out));
    x = layer_norm(t, add(t, x, attn), L.ln1_gain, L.ln1_bias);
    Var ff = gelu(t, add_row(t, matmul(t, x, L.ff1_w), L.ff1_b));
    ff = maybe_drop(add_row(t, matmul(t, ff, L.ff2_w), L.ff2_b));
    x = layer_norm(t, add(t, x, ff), L.ln2_gain, L.ln2_bias);
  }
  return {emb, x};
}

ClassifierOutput classifier_forward(Tape& t, const ModelParams& params, ModelParams* grads,
                                    std::span<const int> ids_with_cls,
                                    const ForwardOptions& opts) {
  EncoderVars vars = register_encoder(t, params.encoder, grads ? &grads->encoder : nullptr);
  Var w = t.parameter(params.cls_w, grads ? &grads->cls_w : nullptr);
  Var b = t.parameter(params.cls_b, grads ? &grads->cls_b : nullptr);
  EncoderOutput enc = encoder_forward(t, vars, params.config, ids_with_cls, opts);
  const std::size_t cls_row[] = {0};
  Var pooled = select_rows(t, enc.hidden, cls_row);
  return {enc.embeddings, add_row(t, matmul(t, pooled, w), b)};
}

// ---------------------------------------------------------------------------

std::vector<double> encode_ids(std::span<const int> ids, const ModelParams& params) {
  if (ids.empty()) throw InputError("cannot classify an empty document");
  for (int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= params.config.vocab_size)
      throw InputError("token id " + std::to_string(id) + " outside the vocabulary");
  Tape t;
  auto ids_cls = with_cls(ids);
  ClassifierOutput out = classifier_forward(t, params, nullptr, ids_cls);
  auto v = t.value(out.logits).values();
  return {v.begin(), v.end()};
}

std::vector<double> encode(const TokenSequence& doc, const ModelParams& params,
                           const Tensor* embedding_override) {
  if (doc.empty()) throw InputError("cannot classify an empty document");
  if (!embedding_override) return encode_ids(doc.ids, params);
  Tape t;
  ForwardOptions opts;
  opts.embedding_override = embedding_override;
  auto ids_cls = with_cls(doc.ids);
  ClassifierOutput out = classifier_forward(t, params, nullptr, ids_cls, opts);
  auto v = t.value(out.logits).values();
  return {v.begin(), v.end()};
}

Prediction prediction_from_logits(std::vector<double> logits) {
  Prediction p;
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (i != best && logits[i] == logits[best]) p.tie = true;
  }
  p.label = label_from_index(static_cast<int>(best));
  p.probabilities = softmax(logits);
  p.logits = std::move(logits);
  return p;
}

Prediction predict(const TokenSequence& doc, const ModelParams& params) {
  return prediction_from_logits(encode(doc, params));
}

Prediction predict_ids(std::span<const int> ids, const ModelParams& params) {
  return prediction_from_logits(encode_ids(ids, params));
}

}  // namespace cfx
