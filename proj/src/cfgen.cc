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

#include "cfx/cfgen.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "cfx/advtrain.h"
#include "cfx/error.h"

namespace cfx {
namespace {

std::vector<std::string> split_on_spaces(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t j = s.find(' ', i);
    const std::size_t end = j == std::string::npos ? s.size() : j;
    if (end > i) out.push_back(s.substr(i, end - i));
    i = end + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& words, std::size_t start, std::size_t end) {
  std::string out;
  for (std::size_t i = start; i < end; ++i) {
    if (i > start) out.push_back(' ');
    out += words[i];
  }
  return out;
}

void do_replace(TokenSequence& seq, std::size_t pos, int id, const std::string& word) {
  seq.ids[pos] = id;
  seq.surface[pos] = word;
}

void do_insert(TokenSequence& seq, std::size_t pos, int id, const std::string& word) {
  seq.ids.insert(seq.ids.begin() + static_cast<std::ptrdiff_t>(pos), id);
  seq.surface.insert(seq.surface.begin() + static_cast<std::ptrdiff_t>(pos), word);
}

void do_erase(TokenSequence& seq, std::size_t pos, std::size_t len) {
  seq.ids.erase(seq.ids.begin() + static_cast<std::ptrdiff_t>(pos),
                seq.ids.begin() + static_cast<std::ptrdiff_t>(pos + len));
  seq.surface.erase(seq.surface.begin() + static_cast<std::ptrdiff_t>(pos),
                    seq.surface.begin() + static_cast<std::ptrdiff_t>(pos + len));
}

// Accumulated edits of one method plus the map from original positions to
// current ones (-1 once deleted).
struct SearchState {
  TokenSequence cur;
  std::vector<std::ptrdiff_t> where;
  std::vector<Edit> edits;
  std::vector<double> logits;
  double margin = 0.0;
  bool flipped = false;
};

class Searcher {
 public:
  Searcher(const TokenSequence& doc, const ModelParams& params, const MlmParams& mlm,
           const Vocabulary& vocab, const Lexicons& lex, const CfConfig& cfg)
      : doc_(doc), params_(params), mlm_(mlm), vocab_(vocab), cfg_(cfg) {
    original_ = prediction_from_logits(encode_ids(doc.ids, params));
    source_ = to_index(original_.label);
    target_ = 1 - source_;
    for (const auto& e : lex.toward(label_from_index(target_))) allowed_.insert(e.word);
  }

  const Prediction& original() const { return original_; }

  SearchState start() const {
    SearchState s;
    s.cur = doc_;
    s.where.resize(doc_.size());
    std::iota(s.where.begin(), s.where.end(), 0);
    s.logits = original_.logits;
    s.margin = margin(s.logits);
    return s;
  }

  double margin(const std::vector<double>& logits) const {
    return logits[static_cast<std::size_t>(target_)] - logits[static_cast<std::size_t>(source_)];
  }

  bool flips(const std::vector<double>& logits) const {
    return prediction_from_logits(logits).label != original_.label;
  }

  std::vector<double> score(const TokenSequence& seq) const {
    return encode_ids(seq.ids, params_);
  }

  // Candidate words at `slot` of `seq` (already masked or to be masked).
  std::vector<std::pair<int, std::string>> candidates(const TokenSequence& seq,
                                                      std::size_t slot) const {
    std::vector<std::pair<int, std::string>> out;
    for (const auto& s : predict_substitutes(seq, slot, cfg_.k, mlm_, vocab_)) {
      if (allowed_.count(s.word)) out.emplace_back(s.id, s.word);
    }
    return out;
  }

  // Tries every candidate edit; returns true on a flip. Otherwise keeps the
  // one with the best margin if it beats the current margin.
  struct Trial {
    TokenSequence seq;
    Edit edit;
    std::ptrdiff_t shift_at = -1;  // insert position, for the position map
  };

  bool try_all(SearchState& st, std::vector<Trial>& trials) const {
    std::size_t best = trials.size();
    std::vector<double> best_logits;
    double best_margin = st.margin;
    for (std::size_t t = 0; t < trials.size(); ++t) {
      std::vector<double> lg = score(trials[t].seq);
      if (flips(lg)) {
        commit(st, trials[t], std::move(lg));
        st.flipped = true;
        return true;
      }
      const double m = margin(lg);
      if (m > best_margin) {
        best_margin = m;
        best = t;
        best_logits = std::move(lg);
      }
    }
    if (best < trials.size()) commit(st, trials[best], std::move(best_logits));
    return false;
  }

  void commit(SearchState& st, Trial& t, std::vector<double> logits) const {
    if (t.edit.op == EditOp::kInsert) {
      for (auto& w : st.where)
        if (w >= t.shift_at) ++w;
    } else if (t.edit.op == EditOp::kDelete) {
      const auto p = static_cast<std::ptrdiff_t>(t.edit.position);
      const auto len = static_cast<std::ptrdiff_t>(split_on_spaces(t.edit.old_text).size());
      for (auto& w : st.where) {
        if (w >= p && w < p + len) w = -1;
        else if (w >= p + len) w -= len;
      }
    }
    st.cur = std::move(t.seq);
    st.edits.push_back(std::move(t.edit));
    st.logits = std::move(logits);
    st.margin = margin(st.logits);
  }

  void step_rep(SearchState& st, std::size_t orig) const {
    if (st.where[orig] < 0) return;
    const auto j = static_cast<std::size_t>(st.where[orig]);
    const std::vector<std::string> words = sequence_words(st.cur, vocab_);
    std::vector<Trial> trials;
    for (const auto& [id, word] : candidates(st.cur, j)) {
      Trial t{st.cur, {j, EditOp::kReplace, words[j], word}};
      do_replace(t.seq, j, id, word);
      trials.push_back(std::move(t));
    }
    try_all(st, trials);
  }

  void step_ins(SearchState& st, std::size_t orig) const {
    if (st.where[orig] < 0) return;
    if (st.cur.size() + 1 > params_.config.max_len) return;
    const auto j = static_cast<std::size_t>(st.where[orig]);
    std::vector<Trial> trials;
    // Slot before the word, then after it.
    for (std::size_t slot : {j, j + 1}) {
      TokenSequence probe = st.cur;
      do_insert(probe, slot, kMask, vocab_.token(kMask));
      for (const auto& [id, word] : candidates(probe, slot)) {
        Trial t{st.cur, {slot, EditOp::kInsert, "", word}, static_cast<std::ptrdiff_t>(slot)};
        do_insert(t.seq, slot, id, word);
        trials.push_back(std::move(t));
      }
    }
    try_all(st, trials);
  }

  void step_rm(SearchState& st, std::size_t orig, const ImportanceProfile& prof) const {
    if (st.where[orig] < 0 || st.cur.size() <= 1) return;
    std::size_t start = static_cast<std::size_t>(st.where[orig]);
    std::size_t len = 1;
    // A negation word or its head removes the whole phrase.
    const SpanScore* owner = &prof.spans[prof.span_index[orig]];
    for (const SpanScore& s : prof.spans) {
      if (s.span.is_negated && s.span.start <= orig && orig < s.span.end) owner = &s;
    }
    const SpanScore& span = *owner;
    if (span.span.is_negated) {
      // Whole phrase when it is still intact and contiguous.
      bool intact = true;
      for (std::size_t i = span.span.start; i < span.span.end; ++i) {
        if (st.where[i] != st.where[span.span.start] +
                               static_cast<std::ptrdiff_t>(i - span.span.start)) {
          intact = false;
        }
      }
      if (intact && st.where[span.span.start] >= 0) {
        start = static_cast<std::size_t>(st.where[span.span.start]);
        len = span.span.length();
      }
    }
    if (len >= st.cur.size()) return;
    const std::vector<std::string> words = sequence_words(st.cur, vocab_);
    std::vector<Trial> trials;
    Trial t{st.cur, {start, EditOp::kDelete, join(words, start, start + len), ""}};
    do_erase(t.seq, start, len);
    trials.push_back(std::move(t));
    try_all(st, trials);
  }

 private:
  const TokenSequence& doc_;
  const ModelParams& params_;
  const MlmParams& mlm_;
  const Vocabulary& vocab_;
  const CfConfig& cfg_;
  Prediction original_;
  int source_ = 0, target_ = 1;
  std::unordered_set<std::string> allowed_;
};

}  // namespace

const char* cf_method_name(CfMethod m) {
  switch (m) {
    case CfMethod::kRep: return "REP";
    case CfMethod::kRm: return "RM";
    case CfMethod::kIns: return "INS";
    case CfMethod::kHotflip: return "HOTFLIP";
  }
  return "REP";
}

CfMethod parse_cf_method(const std::string& s) {
  std::string u;
  for (char c : s) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (u == "REP") return CfMethod::kRep;
  if (u == "RM") return CfMethod::kRm;
  if (u == "INS") return CfMethod::kIns;
  if (u == "HOTFLIP") return CfMethod::kHotflip;
  throw ConfigError("unknown method '" + s + "' (expected REP, RM, INS or HOTFLIP)");
}

const char* edit_op_name(EditOp op) {
  switch (op) {
    case EditOp::kReplace: return "replace";
    case EditOp::kDelete: return "delete";
    case EditOp::kInsert: return "insert";
  }
  return "replace";
}

void CfConfig::validate() const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (max_edits && *max_edits < 1) throw ConfigError("max_edits must be >= 1");
  if (rm_max_edits && *rm_max_edits < 1) throw ConfigError("rm_max_edits must be >= 1");
  if (methods.count(CfMethod::kHotflip)) {
    throw ConfigError("HOTFLIP is a baseline, not a generation method");
  }
}

std::size_t CfConfig::budget(std::size_t n_tokens) const {
  if (max_edits) return *max_edits;
  const auto fifth = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(n_tokens)));
  return std::max<std::size_t>(1, std::min<std::size_t>(10, fifth));
}

std::size_t CfConfig::rm_budget(std::size_t n_tokens) const {
  return rm_max_edits ? *rm_max_edits : budget(n_tokens);
}

TokenSequence apply_edits(const TokenSequence& original, const std::vector<Edit>& edits,
                          const Vocabulary& vocab) {
  TokenSequence seq = original;
  for (const Edit& e : edits) {
    const std::vector<std::string> words = sequence_words(seq, vocab);
    switch (e.op) {
      case EditOp::kReplace:
        if (e.position >= seq.size() || words[e.position] != e.old_text) {
          throw InputError("replace edit does not match the text at position " +
                           std::to_string(e.position));
        }
        do_replace(seq, e.position, vocab.id(e.new_text), e.new_text);
        break;
      case EditOp::kInsert:
        if (e.position > seq.size()) throw InputError("insert position out of range");
        do_insert(seq, e.position, vocab.id(e.new_text), e.new_text);
        break;
      case EditOp::kDelete: {
        const std::size_t len = split_on_spaces(e.old_text).size();
        if (len == 0 || e.position + len > seq.size() ||
            join(words, e.position, e.position + len) != e.old_text) {
          throw InputError("delete edit does not match the text at position " +
                           std::to_string(e.position));
        }
        do_erase(seq, e.position, len);
        break;
      }
    }
  }
  return seq;
}

CounterfactualSet generate(const TokenSequence& doc, const ModelParams& params,
                           const MlmParams& mlm, const Vocabulary& vocab, const Lexicons& lex,
                           const ImportanceProfile& profile, const CfConfig& cfg) {
  cfg.validate();
  if (doc.empty()) throw InputError("generate: empty document");
  if (profile.scores.size() != doc.size()) {
    throw InputError("importance profile covers " + std::to_string(profile.scores.size()) +
                     " positions, document has " + std::to_string(doc.size()));
  }
  Searcher search(doc, params, mlm, vocab, lex, cfg);
  CounterfactualSet out;
  out.original = search.original();

  std::vector<std::size_t> order(doc.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(profile.scores[a]) > std::abs(profile.scores[b]);
  });

  for (CfMethod m : {CfMethod::kRep, CfMethod::kRm, CfMethod::kIns}) {
    if (!cfg.methods.count(m)) continue;
    const std::size_t budget =
        m == CfMethod::kRm ? cfg.rm_budget(doc.size()) : cfg.budget(doc.size());
    SearchState st = search.start();
    for (std::size_t orig : order) {
      if (st.flipped || st.edits.size() >= budget) break;
      switch (m) {
        case CfMethod::kRep: search.step_rep(st, orig); break;
        case CfMethod::kRm: search.step_rm(st, orig, profile); break;
        case CfMethod::kIns: search.step_ins(st, orig); break;
        case CfMethod::kHotflip: break;
      }
    }
    if (!st.flipped) continue;
    // Fresh forward pass before anything is reported.
    std::vector<double> check = encode_ids(st.cur.ids, params);
    if (!search.flips(check)) continue;
    Counterfactual cf;
    cf.method = m;
    cf.revised = std::move(st.cur);
    cf.edits = std::move(st.edits);
    cf.original_logits = out.original.logits;
    cf.revised_logits = std::move(check);
    out.items.push_back(std::move(cf));
  }
  return out;
}

std::optional<Counterfactual> hotflip_baseline(const TokenSequence& doc,
                                               const ModelParams& params,
                                               const Vocabulary& vocab, const CfConfig& cfg) {
  if (cfg.max_edits && *cfg.max_edits == 0) throw ConfigError("hotflip budget must be >= 1");
  cfg.validate();
  if (doc.empty()) throw InputError("hotflip: empty document");
  const Prediction original = predict_ids(doc.ids, params);
  const Label target = label_from_index(1 - to_index(original.label));
  const Tensor& table = params.encoder.token_embedding;
  const std::size_t V = table.rows(), d = table.cols();
  const std::size_t budget = cfg.budget(doc.size());

  Counterfactual cf;
  cf.method = CfMethod::kHotflip;
  cf.revised = doc;
  cf.original_logits = original.logits;
  std::vector<bool> edited(doc.size(), false);
  for (std::size_t step = 0; step < budget; ++step) {
    const Tensor g = loss_and_embedding_grad(params, cf.revised.ids, target).gradient;
    // Gain of swapping position i to word w: -(E[w] - E[w_i]) . dL/de_i.
    double best_gain = -std::numeric_limits<double>::infinity();
    std::size_t best_pos = 0;
    int best_word = -1;
    for (std::size_t i = 0; i < cf.revised.size(); ++i) {
      if (edited[i]) continue;
      auto gi = g.row_span(i + 1);
      const auto cur = static_cast<std::size_t>(cf.revised.ids[i]);
      double base = 0.0;
      for (std::size_t c = 0; c < d; ++c) base += table(cur, c) * gi[c];
      for (std::size_t w = kNumSpecialTokens; w < V; ++w) {
        if (w == cur) continue;
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += table(w, c) * gi[c];
        const double gain = base - dot;
        if (gain > best_gain) {
          best_gain = gain;
          best_pos = i;
          best_word = static_cast<int>(w);
        }
      }
    }
    if (best_word < 0) break;
    const std::vector<std::string> words = sequence_words(cf.revised, vocab);
    const std::string& nw = vocab.token(best_word);
    cf.edits.push_back({best_pos, EditOp::kReplace, words[best_pos], nw});
    do_replace(cf.revised, best_pos, best_word, nw);
    edited[best_pos] = true;
    cf.revised_logits = encode_ids(cf.revised.ids, params);
    if (prediction_from_logits(cf.revised_logits).label != original.label) return cf;
  }
  return std::nullopt;
}

std::vector<std::size_t> edited_positions(const Counterfactual& cf) {
  std::vector<std::size_t> marks;
  for (const Edit& e : cf.edits) {
    switch (e.op) {
      case EditOp::kReplace:
        if (std::find(marks.begin(), marks.end(), e.position) == marks.end()) {
          marks.push_back(e.position);
        }
        break;
      case EditOp::kInsert:
        for (auto& m : marks)
          if (m >= e.position) ++m;
        marks.push_back(e.position);
        break;
      case EditOp::kDelete: {
        const std::size_t len = split_on_spaces(e.old_text).size();
        std::vector<std::size_t> kept;
        for (std::size_t m : marks) {
          if (m < e.position) kept.push_back(m);
          else if (m >= e.position + len) kept.push_back(m - len);
        }
        marks = std::move(kept);
        break;
      }
    }
  }
  std::sort(marks.begin(), marks.end());
  return marks;
}

Plausibility plausibility_proxy(const Counterfactual& cf, const MlmParams& mlm) {
  Plausibility out;
  const std::vector<std::size_t> marks = edited_positions(cf);
  if (marks.empty()) return out;
  double total = 0.0;
  for (std::size_t m : marks) {
    const std::size_t pos[] = {m};
    const auto p = masked_distributions(cf.revised.ids, pos, mlm).front();
    total += std::log(p.at(static_cast<std::size_t>(cf.revised.ids[m])));
  }
  out.tokens = marks.size();
  out.value = total / static_cast<double>(marks.size());
  out.empty = false;
  return out;
}

}  // namespace cfx
