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

#include "cfx/mlm.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"

#include "cfx/error.h"
#include "cfx/random.h"

namespace cfx {
namespace {

constexpr std::uint64_t kMlmShuffleSalt = 0x31a0;
constexpr std::uint64_t kMlmMaskSalt = 0x31a1;
constexpr std::uint64_t kMlmDropSalt = 0x31a2;
constexpr std::uint64_t kMlmEvalSalt = 0x31a3;

MlmParams zeros_like(const MlmParams& p) {
  MlmParams z = p;
  for (auto& [name, t] : z.named_tensors()) t->fill(0.0);
  return z;
}

// Logits (positions.size() x V) with the listed positions replaced by MASK.
Var mlm_forward(Tape& t, const MlmParams& params, MlmParams* grads, std::span<const int> ids,
                std::span<const std::size_t> positions, const ForwardOptions& opts) {
  std::vector<int> ids_cls = with_cls(ids);
  std::vector<std::size_t> rows;
  rows.reserve(positions.size());
  for (std::size_t p : positions) {
    ids_cls[p + 1] = kMask;
    rows.push_back(p + 1);
  }
  EncoderVars vars = register_encoder(t, params.encoder, grads ? &grads->encoder : nullptr);
  Var w = t.parameter(params.out_w, grads ? &grads->out_w : nullptr);
  Var b = t.parameter(params.out_b, grads ? &grads->out_b : nullptr);
  EncoderOutput enc = encoder_forward(t, vars, params.config, ids_cls, opts);
  return add_row(t, matmul(t, select_rows(t, enc.hidden, rows), w), b);
}

void check_positions(std::size_t n, std::span<const std::size_t> positions) {
  std::set<std::size_t> seen;
  for (std::size_t p : positions) {
    if (p >= n) {
      throw InputError("position " + std::to_string(p) + " out of range for " +
                       std::to_string(n) + " tokens");
    }
    if (!seen.insert(p).second) throw InputError("duplicate position " + std::to_string(p));
  }
}

}  // namespace

NamedTensors MlmParams::named_tensors() {
  NamedTensors out;
  append_named(encoder, "encoder.", out);
  out.emplace_back("mlm.w", &out_w);
  out.emplace_back("mlm.b", &out_b);
  return out;
}

ConstNamedTensors MlmParams::named_tensors() const {
  ConstNamedTensors out;
  for (auto& [name, t] : const_cast<MlmParams*>(this)->named_tensors()) out.emplace_back(name, t);
  return out;
}

MlmParams init_mlm(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  MlmParams p;
  p.config = cfg;
  p.encoder = init_encoder(cfg, rng);
  p.out_w = Tensor(cfg.d, cfg.vocab_size);
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  for (double& v : p.out_w.values()) v = std_dev * standard_normal(rng);
  p.out_b = Tensor(1, cfg.vocab_size);
  return p;
}

void MlmTrainConfig::validate() const {
  train.validate();
  if (!(mask_rate > 0.0 && mask_rate <= 1.0)) {
    throw ConfigError("mask_rate must be in (0, 1]; a zero rate leaves the objective undefined");
  }
}

std::string mlm_epoch_log_json(const MlmEpochLog& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["train_loss"] = e.train_loss;
  j["val_top1"] = e.val_top1;
  j["val_top5"] = e.val_top5;
  return j.dump();
}

std::vector<std::size_t> sample_mask_positions(std::size_t n, double mask_rate, Rng& rng) {
  std::vector<std::size_t> out;
  if (n == 0) return out;
  for (std::size_t i = 0; i < n; ++i)
    if (uniform01(rng) < mask_rate) out.push_back(i);
  if (out.empty()) out.push_back(uniform_index(rng, n));
  return out;
}

std::vector<std::vector<double>> masked_distributions(std::span<const int> ids,
                                                      std::span<const std::size_t> positions,
                                                      const MlmParams& params) {
  check_positions(ids.size(), positions);
  std::vector<std::vector<double>> out;
  if (positions.empty()) return out;
  Tape t;
  Var logits = mlm_forward(t, params, nullptr, ids, positions, {});
  const Tensor& v = t.value(logits);
  for (std::size_t r = 0; r < v.rows(); ++r) out.push_back(softmax(v.row_span(r)));
  return out;
}

std::pair<double, double> masked_accuracy(std::span<const EncodedDocument> docs,
                                          const MlmParams& params, double mask_rate,
                                          std::uint64_t seed) {
  std::size_t total = 0, top1 = 0, top5 = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    Rng rng = derive_rng(seed, {kMlmEvalSalt, i});
    const auto& ids = docs[i].ids;
    auto positions = sample_mask_positions(ids.size(), mask_rate, rng);
    auto dists = masked_distributions(ids, positions, params);
    for (std::size_t k = 0; k < positions.size(); ++k) {
      const auto& p = dists[k];
      const int target = ids[positions[k]];
      const double pt = p[static_cast<std::size_t>(target)];
      // Rank = number of tokens strictly more probable (ties favour the target).
      std::size_t better = 0;
      for (double q : p)
        if (q > pt) ++better;
      ++total;
      if (better == 0) ++top1;
      if (better < 5) ++top5;
    }
  }
  if (total == 0) return {0.0, 0.0};
  return {static_cast<double>(top1) / static_cast<double>(total),
          static_cast<double>(top5) / static_cast<double>(total)};
}

MlmTrainResult train_mlm(std::span<const EncodedDocument> train_docs,
                         std::span<const EncodedDocument> heldout, std::size_t vocab_size,
                         const MlmTrainConfig& cfg) {
  cfg.validate();
  if (train_docs.size() < 100) {
    throw DataError("MLM training needs at least 100 documents, got " +
                    std::to_string(train_docs.size()));
  }
  ModelConfig mcfg = cfg.model;
  mcfg.vocab_size = vocab_size;
  mcfg.validate();
  const TrainConfig& tc = cfg.train;

  MlmTrainResult result{init_mlm(mcfg, tc.seed), {}};
  MlmParams& params = result.params;
  MlmParams grads = zeros_like(params);
  const NamedTensors pnamed = params.named_tensors();
  const NamedTensors gnamed = grads.named_tensors();
  Adam adam(pnamed, tc.beta1, tc.beta2, tc.adam_eps);

  std::vector<std::size_t> order(train_docs.size());
  std::iota(order.begin(), order.end(), 0);
  double lr = tc.learning_rate;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    Rng shuffler = derive_rng(tc.seed, {kMlmShuffleSalt, epoch});
    shuffle(order, shuffler);
    double loss_sum = 0.0;
    for (std::size_t start = 0, step = 0; start < order.size(); start += tc.batch_size, ++step) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      for (auto& [name, g] : gnamed) g->fill(0.0);
      for (std::size_t k = start; k < end; ++k) {
        const auto& ids = train_docs[order[k]].ids;
        Rng mask_rng = derive_rng(tc.seed, {kMlmMaskSalt, epoch, step, k});
        Rng drop_rng = derive_rng(tc.seed, {kMlmDropSalt, epoch, step, k});
        auto positions = sample_mask_positions(ids.size(), cfg.mask_rate, mask_rng);
        std::vector<int> targets;
        for (std::size_t p : positions) targets.push_back(ids[p]);
        ForwardOptions opts;
        opts.dropout_rng = &drop_rng;
        opts.dropout = mcfg.dropout;
        Tape t;
        Var logits = mlm_forward(t, params, &grads, ids, positions, opts);
        Var loss = cross_entropy(t, logits, targets);
        loss_sum += t.value(loss)(0, 0);
        t.backward(loss);
      }
      const double s = 1.0 / static_cast<double>(end - start);
      for (auto& [name, g] : gnamed)
        for (double& v : g->values()) v *= s;
      adam.step(pnamed, gnamed, lr);
    }
    MlmEpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(order.size());
    if (!heldout.empty()) {
      auto [a1, a5] = masked_accuracy(heldout, params, cfg.mask_rate, tc.seed);
      entry.val_top1 = a1;
      entry.val_top5 = a5;
    }
    result.log.push_back(entry);
    lr *= tc.lr_decay;
  }
  return result;
}

SubstituteList predict_substitutes(const TokenSequence& doc, std::size_t position, std::size_t k,
                                   const MlmParams& params, const Vocabulary& vocab) {
  if (position >= doc.ids.size()) {
    throw InputError("position " + std::to_string(position) + " out of range for " +
                     std::to_string(doc.ids.size()) + " tokens");
  }
  if (k == 0) return {};
  const std::size_t pos[] = {position};
  const std::vector<double> p = masked_distributions(doc.ids, pos, params).front();
  const int original = doc.ids[position];
  std::vector<int> ids;
  for (std::size_t id = kNumSpecialTokens; id < p.size(); ++id) {
    if (static_cast<int>(id) != original) ids.push_back(static_cast<int>(id));
  }
  auto better = [&](int a, int b) {
    const double pa = p[static_cast<std::size_t>(a)], pb = p[static_cast<std::size_t>(b)];
    return pa != pb ? pa > pb : a < b;
  };
  const std::size_t take = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end(),
                    better);
  SubstituteList out;
  for (std::size_t i = 0; i < take; ++i) {
    out.push_back({vocab.token(ids[i]), ids[i], p[static_cast<std::size_t>(ids[i])]});
  }
  return out;
}

TokenSequence reconstruct(const TokenSequence& doc, std::span<const std::size_t> positions,
                          const MlmParams& params, const Vocabulary& vocab) {
  check_positions(doc.ids.size(), positions);
  TokenSequence out = doc;
  if (positions.empty()) return out;
  auto dists = masked_distributions(doc.ids, positions, params);
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const auto& p = dists[k];
    std::size_t best = kNumSpecialTokens;
    for (std::size_t id = kNumSpecialTokens + 1; id < p.size(); ++id)
      if (p[id] > p[best]) best = id;
    out.ids[positions[k]] = static_cast<int>(best);
    out.surface[positions[k]] = vocab.token(static_cast<int>(best));
  }
  return out;
}

}  // namespace cfx
