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

#ifndef CFX_MODEL_H_
#define CFX_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cfx/autodiff.h"
#include "cfx/corpus.h"
#include "cfx/random.h"
#include "cfx/tensor.h"
#include "cfx/text.h"

namespace cfx {

struct ModelConfig {
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t d_ff = 128;
  std::size_t max_len = kMaxSequenceLength;
  std::size_t vocab_size = 0;
  std::size_t n_classes = 2;
  double dropout = 0.1;

  std::size_t head_dim() const { return d / heads; }
  void validate() const;  // ConfigError
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Per-head projections are d x head_dim; the concatenated heads are mapped
// back to d by `wo` (d x d).
struct AttentionParams {
  std::vector<Tensor> wq, wk, wv;
  Tensor wo;
};

struct EncoderLayerParams {
  AttentionParams attention;
  Tensor ln1_gain, ln1_bias;
  Tensor ff1_w, ff1_b, ff2_w, ff2_b;
  Tensor ln2_gain, ln2_bias;
};

// Token and position tables plus the layer stack. The position table has
// max_len + 1 rows because a CLS token is prepended to every input.
struct EncoderParams {
  Tensor token_embedding;
  Tensor position_embedding;
  std::vector<EncoderLayerParams> layers;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor*>>;
using ConstNamedTensors = std::vector<std::pair<std::string, const Tensor*>>;

void append_named(EncoderParams& p, const std::string& prefix, NamedTensors& out);
EncoderParams init_encoder(const ModelConfig& cfg, Rng& rng);

// Classifier weights: encoder plus an affine head on the CLS position.
struct ModelParams {
  ModelConfig config;
  EncoderParams encoder;
  Tensor cls_w;  // d x n_classes
  Tensor cls_b;  // 1 x n_classes

  NamedTensors named_tensors();
  ConstNamedTensors named_tensors() const;
};

ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed);
// Same shapes, all zeros (gradient and optimizer-moment buffers).
ModelParams zeros_like(const ModelParams& p);

// Forward-pass plumbing ----------------------------------------------------

struct AttentionVars {
  std::vector<Var> wq, wk, wv;
  Var wo;
};

struct EncoderLayerVars {
  AttentionVars attention;
  Var ln1_gain, ln1_bias, ff1_w, ff1_b, ff2_w, ff2_b, ln2_gain, ln2_bias;
};

struct EncoderVars {
  Var token_embedding, position_embedding;
  std::vector<EncoderLayerVars> layers;
};

// Registers parameters on the tape. With `grads` null they are constants;
// otherwise gradients accumulate into the matching tensors of `grads`.
EncoderVars register_encoder(Tape& t, const EncoderParams& p, EncoderParams* grads);
AttentionVars register_attention(Tape& t, const AttentionParams& p, AttentionParams* grads);

struct ForwardOptions {
  // Replaces the summed token+position embeddings. Rows cover the full input,
  // CLS first. Recorded as a differentiable leaf.
  const Tensor* embedding_override = nullptr;
  // Added to the summed embeddings (constant); used for adversarial noise.
  const Tensor* embedding_offset = nullptr;
  // Dropout is active only when a generator is supplied.
  Rng* dropout_rng = nullptr;
  double dropout = 0.0;
  // Per-layer, per-head attention probabilities are appended when non-null.
  std::vector<Tensor>* attention_out = nullptr;
};

// head_j = softmax(Q_j K_j^T / sqrt(head_dim)) V_j with Q_j = X W_j^Q etc.;
// output = concat(head_1..head_h) W^O.
Var multi_head_attention(Tape& t, Var x, const AttentionVars& p,
                         std::vector<Tensor>* attention_out = nullptr);
Tensor multi_head_attention(const Tensor& x, const AttentionParams& p,
                            std::vector<Tensor>* attention_out = nullptr);

struct EncoderOutput {
  Var embeddings;  // summed token + position (+ offset), before dropout
  Var hidden;      // final layer output, one row per input position
};

// `ids` must already start with kCls.
EncoderOutput encoder_forward(Tape& t, const EncoderVars& vars, const ModelConfig& cfg,
                              std::span<const int> ids, const ForwardOptions& opts);

std::vector<int> with_cls(std::span<const int> ids);

// Token + position embedding rows for `ids_with_cls`, as seen by the encoder.
Tensor summed_embeddings(const EncoderParams& p, std::span<const int> ids_with_cls);

struct ClassifierOutput {
  Var embeddings;
  Var logits;  // 1 x n_classes
};

ClassifierOutput classifier_forward(Tape& t, const ModelParams& params, ModelParams* grads,
                                    std::span<const int> ids_with_cls,
                                    const ForwardOptions& opts = {});

// Inference --------------------------------------------------------------

// Logits for a document (CLS is prepended internally). The override, when
// given, must have doc.size() + 1 rows. Throws InputError on empty input.
std::vector<double> encode(const TokenSequence& doc, const ModelParams& params,
                           const Tensor* embedding_override = nullptr);
std::vector<double> encode_ids(std::span<const int> ids, const ModelParams& params);

struct Prediction {
  Label label = Label::kCompleted;
  std::vector<double> logits;
  std::vector<double> probabilities;
  bool tie = false;  // equal logits, resolved toward class 0
};

Prediction prediction_from_logits(std::vector<double> logits);
Prediction predict(const TokenSequence& doc, const ModelParams& params);
Prediction predict_ids(std::span<const int> ids, const ModelParams& params);

}  // namespace cfx

#endif  // CFX_MODEL_H_
