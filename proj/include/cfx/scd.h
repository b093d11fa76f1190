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

#ifndef CFX_SCD_H_
#define CFX_SCD_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfx/model.h"
#include "cfx/text.h"

namespace cfx {

struct ScdConfig {
  std::size_t beta = 5;  // documents sampled per phrase, the scored one included
  std::uint64_t seed = 0;
  NegationList negations = default_negation_list();

  void validate() const;
};

// Documents that phrases are sampled from, with their words, logits and a
// word index precomputed once.
class ScdPool {
 public:
  ScdPool(std::vector<TokenSequence> docs, const ModelParams& params, const Vocabulary& vocab,
          std::size_t threads = 1);

  std::size_t size() const { return docs_.size(); }
  const TokenSequence& doc(std::size_t i) const { return docs_[i]; }
  const std::vector<double>& logits(std::size_t i) const { return logits_[i]; }
  // Start of the first occurrence of `phrase` in document i, or npos.
  std::size_t find(std::size_t i, std::span<const std::string> phrase) const;
  // Indices of documents containing `phrase`, ascending.
  std::vector<std::size_t> containing(std::span<const std::string> phrase) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<TokenSequence> docs_;
  std::vector<std::vector<std::string>> words_;
  std::vector<std::vector<double>> logits_;
  std::unordered_map<std::string, std::vector<std::size_t>> index_;
};

struct SpanScore {
  PhraseSpan span;
  double score = 0.0;       // mean logit drop of the predicted class
  std::size_t samples = 0;  // documents averaged, the scored one included
  bool fallback = false;    // no other pool document contained the phrase
};

// Signed per-position scores in logit units. Every position carries its own
// masking score except the head of a negated span, which carries minus the
// score of the whole span.
struct ImportanceProfile {
  std::vector<double> scores;
  std::vector<std::size_t> span_index;  // per position, into `spans`
  std::vector<SpanScore> spans;
  std::vector<std::string> words;
  Label predicted = Label::kCompleted;
  std::size_t beta = 1;
};

// Logit of class `cls` with the positions [start, end) replaced by MASK.
double masked_logit(std::span<const int> ids, std::size_t start, std::size_t end, int cls,
                    const ModelParams& params);

// With an empty pool (or beta == 1) only `doc` is used. Pool documents whose
// ids equal doc's are treated as the document itself.
ImportanceProfile importance(const TokenSequence& doc, const ModelParams& params,
                             const ScdPool* pool, const Vocabulary& vocab, const ScdConfig& cfg);

enum class Polarity { kPos, kNeg };
const char* polarity_name(Polarity p);

struct LexiconEntry {
  std::string word;
  Polarity polarity = Polarity::kPos;
  double sensitivity = 0.0;  // accumulated magnitude, >= 0
};

// Words that pull toward Completed (pos) or Rumour (neg); each list is sorted
// by descending sensitivity, ties by word.
struct Lexicons {
  std::vector<LexiconEntry> pos;
  std::vector<LexiconEntry> neg;

  bool in_pos(const std::string& w) const;
  bool in_neg(const std::string& w) const;
  const std::vector<LexiconEntry>& toward(Label target) const {
    return target == Label::kCompleted ? pos : neg;
  }
};

// Scores every document against the set itself as the pool. A word's net
// contribution adds its score when the document is predicted Completed and
// subtracts it otherwise; the sign of the total picks the list.
Lexicons build_lexicons(std::span<const TokenSequence> docs, const ModelParams& params,
                        const Vocabulary& vocab, const ScdConfig& cfg, std::size_t threads = 1,
                        std::vector<ImportanceProfile>* profiles = nullptr);

// TSV rows word, POS|NEG, sensitivity (6 decimals), sorted by descending
// sensitivity across both lists.
void save_lexicons(const Lexicons& lex, const std::filesystem::path& path);
Lexicons load_lexicons(const std::filesystem::path& path);

}  // namespace cfx

#endif  // CFX_SCD_H_
