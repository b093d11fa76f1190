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

#include "cfx/advtrain.h"

#include <cmath>
#include <numeric>

#include "json.hpp"

#include "cfx/error.h"
#include "cfx/parallel.h"
#include "cfx/random.h"

namespace cfx {
namespace {

constexpr std::uint64_t kShuffleSalt = 0x5f1e;
constexpr std::uint64_t kDropoutSalt = 0xd409;
constexpr std::uint64_t kTokenMaskSalt = 0x7a5c;

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

void zero(ModelParams& g) {
  for (auto& [name, t] : g.named_tensors()) t->fill(0.0);
}

void scale_all(ModelParams& g, double s) {
  for (auto& [name, t] : g.named_tensors())
    for (double& v : t->values()) v *= s;
}

// Cross-entropy of one example on a fresh tape. With `grads` null the
// parameters are constants.
struct Pass {
  Tape tape;
  ClassifierOutput out;
  Var loss;
};

void run_pass(Pass& p, const ModelParams& params, ModelParams* grads,
              std::span<const int> ids_cls, Label label, const ForwardOptions& opts) {
  p.out = classifier_forward(p.tape, params, grads, ids_cls, opts);
  const int target[] = {to_index(label)};
  p.loss = cross_entropy(p.tape, p.out.logits, target);
}

}  // namespace

const char* adv_mode_name(AdvMode m) {
  switch (m) {
    case AdvMode::kNone: return "none";
    case AdvMode::kFgm: return "fgm";
    case AdvMode::kPgd: return "pgd";
  }
  return "none";
}

AdvMode parse_adv_mode(const std::string& s) {
  if (s == "none") return AdvMode::kNone;
  if (s == "fgm") return AdvMode::kFgm;
  if (s == "pgd") return AdvMode::kPgd;
  throw ConfigError("unknown adversarial mode '" + s + "' (expected none, fgm or pgd)");
}

void AdvConfig::validate() const {
  if (mode == AdvMode::kNone) return;
  if (!finite_positive(epsilon)) throw ConfigError("epsilon must be > 0");
  if (!(std::isfinite(adv_weight) && adv_weight >= 0.0)) {
    throw ConfigError("adv_weight must be >= 0");
  }
  if (mode == AdvMode::kPgd) {
    if (!finite_positive(alpha)) throw ConfigError("alpha must be > 0");
    if (steps < 1) throw ConfigError("pgd steps must be >= 1");
  }
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be > 0");
  if (!finite_positive(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must be in (0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must be in [0, 1)");
  }
  if (!finite_positive(adam_eps)) throw ConfigError("adam_eps must be > 0");
  if (!(token_mask_rate >= 0.0 && token_mask_rate < 1.0)) {
    throw ConfigError("token_mask_rate must be in [0, 1)");
  }
}

std::optional<Tensor> fgm_perturb(const Tensor& g, double epsilon) {
  const double n = g.norm();
  if (!(n > 0.0) || !std::isfinite(n)) return std::nullopt;
  Tensor r = g;
  const double s = epsilon / n;
  for (double& v : r.values()) v *= s;
  return r;
}

std::optional<Tensor> pgd_step(const Tensor& e_t, const Tensor& e_0, const Tensor& g_t,
                               double alpha, double epsilon) {
  if (!e_t.same_shape(e_0) || !e_t.same_shape(g_t)) {
    throw ShapeError("pgd_step: " + shape_to_string(e_t.shape()) + " / " +
                     shape_to_string(e_0.shape()) + " / " + shape_to_string(g_t.shape()));
  }
  if (!finite_positive(alpha) || !finite_positive(epsilon)) {
    throw ConfigError("pgd_step: alpha and epsilon must be > 0");
  }
  const double gn = g_t.norm();
  if (!(gn > 0.0) || !std::isfinite(gn)) return std::nullopt;

  Tensor offset = e_t;
  auto o = offset.values();
  auto e0 = e_0.values();
  auto g = g_t.values();
  const double step = alpha / gn;
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = o[i] + step * g[i] - e0[i];
  const double on = offset.norm();
  if (on > epsilon) {
    const double s = epsilon / on;
    for (double& v : o) v *= s;
  }
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += e0[i];
  return offset;
}

std::vector<EncodedDocument> encode_documents(std::span<const Document> docs,
                                              const Vocabulary& vocab, std::size_t max_len) {
  std::vector<EncodedDocument> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    TokenSequence seq = tokenize(d.text, vocab, max_len);
    if (seq.ids.empty()) throw InputError("document " + d.id + " has no tokens");
    out.push_back({std::move(seq.ids), d.label});
  }
  return out;
}

Vocabulary build_vocabulary(std::span<const Document> train, std::size_t min_freq) {
  std::vector<std::vector<std::string>> words;
  words.reserve(train.size());
  for (const auto& d : train) words.push_back(lowercase_words(d.text));
  return Vocabulary::build(words, min_freq);
}

Adam::Adam(const NamedTensors& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, t] : params) {
    m_.push_back(Tensor::zeros_like(*t));
    v_.push_back(Tensor::zeros_like(*t));
  }
}

void Adam::step(const NamedTensors& params, const NamedTensors& grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("Adam: parameter list changed size");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < m_.size(); ++k) {
    auto p = params[k].second->values();
    auto g = grads[k].second->values();
    auto m = m_[k].values();
    auto v = v_[k].values();
    if (p.size() != g.size() || p.size() != m.size()) {
      throw ShapeError("Adam: shape mismatch for " + params[k].first);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

std::string epoch_log_json(const EpochLog& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["train_loss"] = e.train_loss;
  j["val_mcc"] = e.validation.mcc;
  j["val_acc"] = e.validation.accuracy;
  j["val_f1"] = e.validation.f1;
  j["mode"] = adv_mode_name(e.mode);
  return j.dump();
}

double accumulate_example_gradient(const ModelParams& params, ModelParams& grads,
                                   std::span<const int> ids, Label label,
                                   const AdvConfig& acfg, Rng* dropout_rng) {
  const std::vector<int> ids_cls = with_cls(ids);
  ForwardOptions clean;
  clean.dropout_rng = dropout_rng;
  clean.dropout = params.config.dropout;
  Pass p;
  run_pass(p, params, &grads, ids_cls, label, clean);
  const double loss = p.tape.value(p.loss)(0, 0);
  p.tape.backward(p.loss);
  if (acfg.mode == AdvMode::kNone || acfg.adv_weight == 0.0) return loss;

  Tensor g = p.tape.grad(p.out.embeddings);
  std::optional<Tensor> r;
  if (acfg.mode == AdvMode::kFgm) {
    r = fgm_perturb(g, acfg.epsilon);
  } else {
    const Tensor e0 = p.tape.value(p.out.embeddings);
    Tensor e = e0;
    bool moved = false;
    for (std::size_t step = 0; step < acfg.steps; ++step) {
      if (step > 0) {
        // Gradient at the current iterate; parameters are constants here.
        ForwardOptions inner;
        inner.embedding_override = &e;
        Pass q;
        run_pass(q, params, nullptr, ids_cls, label, inner);
        q.tape.backward(q.loss);
        g = q.tape.grad(q.out.embeddings);
      }
      std::optional<Tensor> next = pgd_step(e, e0, g, acfg.alpha, acfg.epsilon);
      if (!next) break;
      e = std::move(*next);
      moved = true;
    }
    if (moved) {
      Tensor off = e;
      off.add_scaled(e0, -1.0);
      r = std::move(off);
    }
  }
  if (!r) return loss;

  ForwardOptions adv;
  adv.embedding_offset = &*r;
  Pass a;
  run_pass(a, params, &grads, ids_cls, label, adv);
  Var weighted = acfg.adv_weight == 1.0 ? a.loss : scale(a.tape, a.loss, acfg.adv_weight);
  a.tape.backward(weighted);
  return loss;
}

LossWithEmbeddingGrad loss_and_embedding_grad(const ModelParams& params,
                                              std::span<const int> ids, Label label,
                                              const Tensor* embedding_override) {
  const std::vector<int> ids_cls = with_cls(ids);
  LossWithEmbeddingGrad out;
  out.embeddings = embedding_override ? *embedding_override
                                      : summed_embeddings(params.encoder, ids_cls);
  ForwardOptions opts;
  opts.embedding_override = &out.embeddings;
  Pass p;
  run_pass(p, params, nullptr, ids_cls, label, opts);
  out.loss = p.tape.value(p.loss)(0, 0);
  p.tape.backward(p.loss);
  out.gradient = p.tape.grad(p.out.embeddings);
  return out;
}

std::vector<Label> predict_labels(const ModelParams& params,
                                  std::span<const EncodedDocument> docs, std::size_t threads) {
  std::vector<Label> out(docs.size());
  parallel_for(docs.size(), threads,
               [&](std::size_t i) { out[i] = predict_ids(docs[i].ids, params).label; });
  return out;
}

Metrics evaluate(const ModelParams& params, std::span<const EncodedDocument> docs,
                 std::size_t threads) {
  std::vector<Label> pred = predict_labels(params, docs, threads);
  std::vector<Label> gold;
  gold.reserve(docs.size());
  for (const auto& d : docs) gold.push_back(d.label);
  return compute_metrics(pred, gold);
}

TrainResult train(const SplitDataset& data, const Vocabulary& vocab, ModelConfig mcfg,
                  const TrainConfig& tcfg, const AdvConfig& acfg) {
  if (data.train.empty()) throw DataError("training split is empty");
  mcfg.vocab_size = vocab.size();
  mcfg.validate();
  tcfg.validate();
  acfg.validate();

  const auto train_docs = encode_documents(data.train, vocab, mcfg.max_len);
  const auto val_docs = encode_documents(data.validation, vocab, mcfg.max_len);

  TrainResult result{init_model(mcfg, tcfg.seed), vocab, {}};
  ModelParams& params = result.params;
  ModelParams grads = zeros_like(params);
  const NamedTensors pnamed = params.named_tensors();
  const NamedTensors gnamed = grads.named_tensors();
  Adam adam(pnamed, tcfg.beta1, tcfg.beta2, tcfg.adam_eps);

  std::vector<std::size_t> order(train_docs.size());
  std::iota(order.begin(), order.end(), 0);
  double lr = tcfg.learning_rate;
  std::vector<int> ids;

  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    ModelParams last_good = params;
    Rng shuffler = derive_rng(tcfg.seed, {kShuffleSalt, epoch});
    shuffle(order, shuffler);
    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0, step = 0; start < order.size();
           start += tcfg.batch_size, ++step) {
        const std::size_t end = std::min(order.size(), start + tcfg.batch_size);
        zero(grads);
        for (std::size_t k = start; k < end; ++k) {
          const auto& doc = train_docs[order[k]];
          Rng drop = derive_rng(tcfg.seed, {kDropoutSalt, epoch, step, k});
          ids = doc.ids;
          if (tcfg.token_mask_rate > 0.0) {
            Rng mask = derive_rng(tcfg.seed, {kTokenMaskSalt, epoch, step, k});
            for (int& id : ids)
              if (uniform01(mask) < tcfg.token_mask_rate) id = kMask;
          }
          const double l = accumulate_example_gradient(params, grads, ids, doc.label, acfg, &drop);
          if (!std::isfinite(l)) throw NumericError("non-finite loss");
          loss_sum += l;
        }
        scale_all(grads, 1.0 / static_cast<double>(end - start));
        adam.step(pnamed, gnamed, lr);
        for (const auto& [name, t] : pnamed) require_finite(*t, name.c_str());
      }
    } catch (const NumericError& e) {
      throw DivergenceError("training diverged in epoch " + std::to_string(epoch) + ": " +
                                e.what(),
                            std::move(last_good), result.log);
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(order.size());
    entry.mode = acfg.mode;
    if (!val_docs.empty()) entry.validation = evaluate(params, val_docs);
    result.log.push_back(entry);
    lr *= tcfg.lr_decay;
  }
  return result;
}

TrainResult train(const SplitDataset& data, ModelConfig mcfg, const TrainConfig& tcfg,
                  const AdvConfig& acfg) {
  return train(data, build_vocabulary(data.train), std::move(mcfg), tcfg, acfg);
}

}  // namespace cfx
