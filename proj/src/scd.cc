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

#include "cfx/scd.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cfx/error.h"
#include "cfx/parallel.h"
#include "cfx/random.h"

namespace cfx {
namespace {

std::uint64_t fnv1a(std::span<const std::string> words) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& w : words) {
    for (unsigned char c : w) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0x1f;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(std::span<const int> ids) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int id : ids) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(id));
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool entry_order(const LexiconEntry& a, const LexiconEntry& b) {
  return a.sensitivity != b.sensitivity ? a.sensitivity > b.sensitivity : a.word < b.word;
}

}  // namespace

void ScdConfig::validate() const {
  if (beta < 1) throw ConfigError("beta must be >= 1");
  if (negations.empty()) throw ConfigError("negation list is empty");
}

ScdPool::ScdPool(std::vector<TokenSequence> docs, const ModelParams& params,
                 const Vocabulary& vocab, std::size_t threads)
    : docs_(std::move(docs)) {
  words_.reserve(docs_.size());
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    words_.push_back(sequence_words(docs_[i], vocab));
    std::set<std::string> seen(words_[i].begin(), words_[i].end());
    for (const auto& w : seen) index_[w].push_back(i);
  }
  logits_.resize(docs_.size());
  parallel_for(docs_.size(), threads,
               [&](std::size_t i) { logits_[i] = encode_ids(docs_[i].ids, params); });
}

std::size_t ScdPool::find(std::size_t i, std::span<const std::string> phrase) const {
  const auto& w = words_.at(i);
  if (phrase.empty() || phrase.size() > w.size()) return npos;
  for (std::size_t s = 0; s + phrase.size() <= w.size(); ++s) {
    if (std::equal(phrase.begin(), phrase.end(), w.begin() + static_cast<std::ptrdiff_t>(s))) {
      return s;
    }
  }
  return npos;
}

std::vector<std::size_t> ScdPool::containing(std::span<const std::string> phrase) const {
  std::vector<std::size_t> out;
  if (phrase.empty()) return out;
  auto it = index_.find(phrase.front());
  if (it == index_.end()) return out;
  for (std::size_t i : it->second)
    if (find(i, phrase) != npos) out.push_back(i);
  return out;
}

double masked_logit(std::span<const int> ids, std::size_t start, std::size_t end, int cls,
                    const ModelParams& params) {
  if (start > end || end > ids.size()) throw InputError("mask range out of bounds");
  std::vector<int> masked(ids.begin(), ids.end());
  for (std::size_t i = start; i < end; ++i) masked[i] = kMask;
  return encode_ids(masked, params).at(static_cast<std::size_t>(cls));
}

ImportanceProfile importance(const TokenSequence& doc, const ModelParams& params,
                             const ScdPool* pool, const Vocabulary& vocab, const ScdConfig& cfg) {
  cfg.validate();
  if (doc.empty()) throw InputError("importance: empty document");
  ImportanceProfile prof;
  prof.beta = cfg.beta;
  prof.words = sequence_words(doc, vocab);
  const std::vector<double> logits = encode_ids(doc.ids, params);
  const Prediction pred = prediction_from_logits(logits);
  prof.predicted = pred.label;
  const int cls = to_index(pred.label);
  const double base = logits[static_cast<std::size_t>(cls)];
  const std::uint64_t doc_hash = fnv1a(std::span<const int>(doc.ids));

  auto score_span = [&](const PhraseSpan& span) {
    SpanScore s;
    s.span = span;
    double total = base - masked_logit(doc.ids, span.start, span.end, cls, params);
    s.samples = 1;
    if (cfg.beta > 1 && pool) {
      std::span<const std::string> phrase(prof.words.data() + span.start, span.length());
      std::vector<std::size_t> others;
      for (std::size_t i : pool->containing(phrase))
        if (pool->doc(i).ids != doc.ids) others.push_back(i);
      if (others.empty()) {
        s.fallback = true;
      } else {
        Rng rng = derive_rng(cfg.seed, {fnv1a(phrase), doc_hash});
        const std::size_t take = std::min(cfg.beta - 1, others.size());
        // Partial Fisher-Yates: the first `take` entries form a uniform sample.
        for (std::size_t k = 0; k < take; ++k) {
          std::swap(others[k], others[k + uniform_index(rng, others.size() - k)]);
          const std::size_t j = others[k];
          const std::size_t start = pool->find(j, phrase);
          total += pool->logits(j)[static_cast<std::size_t>(cls)] -
                   masked_logit(pool->doc(j).ids, start, start + span.length(), cls, params);
        }
        s.samples += take;
      }
    } else if (cfg.beta > 1) {
      s.fallback = true;
    }
    s.score = total / static_cast<double>(s.samples);
    return s;
  };

  const std::size_t n = doc.size();
  prof.scores.assign(n, 0.0);
  prof.span_index.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    prof.spans.push_back(score_span(PhraseSpan{i, i + 1, i, false}));
    prof.scores[i] = prof.spans.back().score;
    prof.span_index[i] = i;
  }
  for (const PhraseSpan& span : chunk_negation_phrases(prof.words, cfg.negations)) {
    if (!span.is_negated) continue;
    prof.spans.push_back(score_span(span));
    prof.scores[span.head] = -prof.spans.back().score;
    prof.span_index[span.head] = prof.spans.size() - 1;
  }
  return prof;
}

const char* polarity_name(Polarity p) { return p == Polarity::kPos ? "POS" : "NEG"; }

bool Lexicons::in_pos(const std::string& w) const {
  return std::any_of(pos.begin(), pos.end(), [&](const LexiconEntry& e) { return e.word == w; });
}

bool Lexicons::in_neg(const std::string& w) const {
  return std::any_of(neg.begin(), neg.end(), [&](const LexiconEntry& e) { return e.word == w; });
}

Lexicons build_lexicons(std::span<const TokenSequence> docs, const ModelParams& params,
                        const Vocabulary& vocab, const ScdConfig& cfg, std::size_t threads,
                        std::vector<ImportanceProfile>* profiles) {
  cfg.validate();
  ScdPool pool(std::vector<TokenSequence>(docs.begin(), docs.end()), params, vocab, threads);
  std::vector<ImportanceProfile> profs(docs.size());
  parallel_for(docs.size(), threads,
               [&](std::size_t i) { profs[i] = importance(docs[i], params, &pool, vocab, cfg); });

  std::map<std::string, double> net;
  for (const auto& p : profs) {
    const double sign = p.predicted == Label::kCompleted ? 1.0 : -1.0;
    for (std::size_t i = 0; i < p.words.size(); ++i) net[p.words[i]] += sign * p.scores[i];
  }
  Lexicons lex;
  for (const auto& [word, v] : net) {
    if (v > 0.0) lex.pos.push_back({word, Polarity::kPos, v});
    else if (v < 0.0) lex.neg.push_back({word, Polarity::kNeg, -v});
  }
  std::sort(lex.pos.begin(), lex.pos.end(), entry_order);
  std::sort(lex.neg.begin(), lex.neg.end(), entry_order);
  if (profiles) *profiles = std::move(profs);
  return lex;
}

void save_lexicons(const Lexicons& lex, const std::filesystem::path& path) {
  std::vector<LexiconEntry> all = lex.pos;
  all.insert(all.end(), lex.neg.begin(), lex.neg.end());
  std::stable_sort(all.begin(), all.end(), entry_order);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  char buf[64];
  for (const auto& e : all) {
    std::snprintf(buf, sizeof buf, "%.6f", e.sensitivity);
    out << e.word << '\t' << polarity_name(e.polarity) << '\t' << buf << '\n';
  }
  if (!out) throw InputError("failed writing " + path.string());
}

Lexicons load_lexicons(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  Lexicons lex;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 3) throw ParseError("expected 3 tab-separated columns", lineno);
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(cols[2], &used);
      if (used != cols[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("bad sensitivity '" + cols[2] + "'", lineno);
    }
    if (!(v >= 0.0)) throw ParseError("negative sensitivity", lineno);
    if (!seen.insert(cols[0]).second) {
      throw SchemaError("line " + std::to_string(lineno) + ": word '" + cols[0] +
                        "' listed twice");
    }
    if (cols[1] == "POS") lex.pos.push_back({cols[0], Polarity::kPos, v});
    else if (cols[1] == "NEG") lex.neg.push_back({cols[0], Polarity::kNeg, v});
    else throw SchemaError("line " + std::to_string(lineno) + ": unknown polarity '" + cols[1] + "'");
  }
  std::stable_sort(lex.pos.begin(), lex.pos.end(), entry_order);
  std::stable_sort(lex.neg.begin(), lex.neg.end(), entry_order);
  return lex;
}

}  // namespace cfx
