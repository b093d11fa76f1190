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

#ifndef CFX_ADVTRAIN_H_
#define CFX_ADVTRAIN_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfx/corpus.h"
#include "cfx/error.h"
#include "cfx/model.h"
#include "cfx/text.h"

namespace cfx {

enum class AdvMode { kNone, kFgm, kPgd };
const char* adv_mode_name(AdvMode m);
AdvMode parse_adv_mode(const std::string& s);  // ConfigError

struct AdvConfig {
  AdvMode mode = AdvMode::kNone;
  double epsilon = 0.1;     // L2 budget over the whole sequence embedding
  double alpha = 0.03;      // PGD step size
  std::size_t steps = 3;    // PGD iterations
  double adv_weight = 1.0;  // total loss = clean + adv_weight * adversarial

  void validate() const;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double lr_decay = 0.95;  // multiplied in once per epoch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Fraction of input tokens replaced by MASK in each training example, so
  // the classifier sees masked inputs and cannot lean on one class's cues
  // alone.
  double token_mask_rate = 0.15;
  std::uint64_t seed = 1;

  void validate() const;
};

// Binary metrics with Completed as the positive class.
struct Metrics {
  double mcc = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  bool mcc_degenerate = false;  // zero MCC denominator, mcc reported as 0
  bool f1_degenerate = false;   // 2TP + FP + FN == 0, f1 reported as 0
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
};

// Throws InputError when the lengths differ or are zero.
Metrics compute_metrics(std::span<const Label> predictions, std::span<const Label> labels);

// r = epsilon * g / ||g||_2. Empty when ||g||_2 == 0 (the caller skips the
// perturbation for that step).
std::optional<Tensor> fgm_perturb(const Tensor& g, double epsilon);

// One projected ascent step: e' = e_t + alpha * g_t / ||g_t||_2 followed by
// projection onto the L2 ball of radius epsilon around e_0. Empty when
// ||g_t||_2 == 0.
std::optional<Tensor> pgd_step(const Tensor& e_t, const Tensor& e_0, const Tensor& g_t,
                               double alpha, double epsilon);

struct EncodedDocument {
  std::vector<int> ids;  // without CLS
  Label label = Label::kCompleted;
};

std::vector<EncodedDocument> encode_documents(std::span<const Document> docs,
                                              const Vocabulary& vocab,
                                              std::size_t max_len = kMaxSequenceLength);

// Builds the vocabulary from the training split only.
Vocabulary build_vocabulary(std::span<const Document> train, std::size_t min_freq = 2);

// Adam over a fixed list of tensors.
class Adam {
 public:
  Adam(const NamedTensors& params, double beta1, double beta2, double eps);
  void step(const NamedTensors& params, const NamedTensors& grads, double lr);

 private:
  std::vector<Tensor> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  Metrics validation;
  AdvMode mode = AdvMode::kNone;
};

std::string epoch_log_json(const EpochLog& e);

struct TrainResult {
  ModelParams params;
  Vocabulary vocab;
  std::vector<EpochLog> log;
};

// Raised when the loss turns non-finite; carries the parameters from the end
// of the last completed epoch.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, ModelParams last_good, std::vector<EpochLog> log)
      : NumericError(what), last_good_(std::move(last_good)), log_(std::move(log)) {}
  const ModelParams& last_good() const { return last_good_; }
  const std::vector<EpochLog>& log() const { return log_; }

 private:
  ModelParams last_good_;
  std::vector<EpochLog> log_;
};

// Mini-batch Adam with per-epoch learning-rate decay. Each example runs a
// clean forward/backward pass; FGM adds one adversarial pass at e + r_fgm,
// PGD runs `steps` projected ascent steps and accumulates the adversarial
// loss at the final iterate. Dropout is only active in the clean pass.
// Deterministic for a fixed seed. `vocab` must come from the train split.
TrainResult train(const SplitDataset& data, const Vocabulary& vocab, ModelConfig mcfg,
                  const TrainConfig& tcfg, const AdvConfig& acfg);
TrainResult train(const SplitDataset& data, ModelConfig mcfg, const TrainConfig& tcfg,
                  const AdvConfig& acfg);

// Adds the clean (and adversarial) gradients of one example into `grads`;
// returns the clean loss.
double accumulate_example_gradient(const ModelParams& params, ModelParams& grads,
                                   std::span<const int> ids, Label label,
                                   const AdvConfig& acfg, Rng* dropout_rng);

struct LossWithEmbeddingGrad {
  double loss = 0.0;
  Tensor embeddings;  // summed token+position embeddings, CLS row first
  Tensor gradient;    // dLoss/dEmbeddings
};

// Deterministic (dropout off) loss and its gradient w.r.t. the embeddings.
LossWithEmbeddingGrad loss_and_embedding_grad(const ModelParams& params,
                                              std::span<const int> ids, Label label,
                                              const Tensor* embedding_override = nullptr);

std::vector<Label> predict_labels(const ModelParams& params,
                                  std::span<const EncodedDocument> docs, std::size_t threads = 1);
Metrics evaluate(const ModelParams& params, std::span<const EncodedDocument> docs,
                 std::size_t threads = 1);

}  // namespace cfx

#endif  // CFX_ADVTRAIN_H_
