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

#ifndef CFX_MLM_H_
#define CFX_MLM_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cfx/advtrain.h"
#include "cfx/corpus.h"
#include "cfx/model.h"
#include "cfx/text.h"

namespace cfx {

// Encoder plus a vocabulary-sized output layer.
struct MlmParams {
  ModelConfig config;
  EncoderParams encoder;
  Tensor out_w;  // d x vocab_size
  Tensor out_b;  // 1 x vocab_size

  NamedTensors named_tensors();
  ConstNamedTensors named_tensors() const;
};

MlmParams init_mlm(const ModelConfig& cfg, std::uint64_t seed);

struct MlmTrainConfig {
  ModelConfig model;
  TrainConfig train{.epochs = 6, .learning_rate = 5e-3};
  double mask_rate = 0.15;

  void validate() const;
};

struct MlmEpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_top1 = 0.0;  // masked-token accuracy on held-out documents
  double val_top5 = 0.0;
};

std::string mlm_epoch_log_json(const MlmEpochLog& e);

struct MlmTrainResult {
  MlmParams params;
  std::vector<MlmEpochLog> log;
};

// Positions (0-based, without CLS) to mask: each with probability
// `mask_rate`, at least one per document.
std::vector<std::size_t> sample_mask_positions(std::size_t n, double mask_rate, Rng& rng);

// Masked-token objective over `train_docs`; `heldout` (may be empty) is
// scored after every epoch. Needs at least 100 training documents.
MlmTrainResult train_mlm(std::span<const EncodedDocument> train_docs,
                         std::span<const EncodedDocument> heldout, std::size_t vocab_size,
                         const MlmTrainConfig& cfg);

// Masks every listed position at once and returns one probability row per
// position (vocab_size columns).
std::vector<std::vector<double>> masked_distributions(std::span<const int> ids,
                                                      std::span<const std::size_t> positions,
                                                      const MlmParams& params);

// Top-k accuracy of the original token when each held-out document has its
// sampled positions masked. Returns {top1, top5}.
std::pair<double, double> masked_accuracy(std::span<const EncodedDocument> docs,
                                          const MlmParams& params, double mask_rate,
                                          std::uint64_t seed);

struct Substitute {
  std::string word;
  int id = 0;
  double probability = 0.0;
};
using SubstituteList = std::vector<Substitute>;

// Top-k words at `position` once it is masked, excluding special tokens and
// the original word. Ties go to the lower id.
SubstituteList predict_substitutes(const TokenSequence& doc, std::size_t position, std::size_t k,
                                   const MlmParams& params, const Vocabulary& vocab);

// Fills every masked position with its most probable non-special word.
TokenSequence reconstruct(const TokenSequence& doc, std::span<const std::size_t> positions,
                          const MlmParams& params, const Vocabulary& vocab);

}  // namespace cfx

#endif  // CFX_MLM_H_
