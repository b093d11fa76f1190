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

#ifndef CFX_TEXT_H_
#define CFX_TEXT_H_

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cfx {

inline constexpr std::size_t kMaxSequenceLength = 256;

enum SpecialToken : int { kPad = 0, kUnk = 1, kMask = 2, kCls = 3 };
inline constexpr int kNumSpecialTokens = 4;

// Lowercased word-level tokens plus their original surface strings.
struct TokenSequence {
  std::vector<int> ids;
  std::vector<std::string> surface;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// Token <-> id bijection. Ids 0..3 are reserved for PAD, UNK, MASK and CLS.
class Vocabulary {
 public:
  Vocabulary();

  // Counts every token across `documents` (already lowercased word strings)
  // and keeps those seen at least min_freq times, in descending frequency
  // order with ties broken alphabetically.
  static Vocabulary build(std::span<const std::vector<std::string>> documents,
                          std::size_t min_freq = 2);
  static Vocabulary from_tokens(std::vector<std::string> tokens,
                                std::vector<std::size_t> freqs = {});

  std::size_t size() const { return tokens_.size(); }
  int id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::string& token(int id) const;
  std::size_t frequency(int id) const { return freqs_.at(static_cast<std::size_t>(id)); }
  std::size_t min_freq() const { return min_freq_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  static bool is_special(int id) { return id >= 0 && id < kNumSpecialTokens; }

  // TSV rows: token, id, frequency.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> freqs_;
  std::unordered_map<std::string, int> index_;
  std::size_t min_freq_ = 2;
};

// Splits on whitespace and punctuation, keeping case. Decimal numbers such
// as "3.2" stay whole; "n't" and "'s" clitics are split off ("can't" ->
// "ca", "n't").
std::vector<std::string> split_words(const std::string& text);

// Applies split_words, truncates to max_len and maps through the vocabulary.
// Surface strings keep the original casing.
TokenSequence tokenize(const std::string& text, const Vocabulary& vocab,
                       std::size_t max_len = kMaxSequenceLength);

// Lowercased words without a vocabulary lookup.
std::vector<std::string> lowercase_words(const std::string& text);

// Joins surface strings with single spaces; clitics and closing punctuation
// attach to the preceding word.
std::string detokenize(const TokenSequence& seq);

// Lowercased word per position: the vocabulary token, or the surface form
// for out-of-vocabulary positions.
std::vector<std::string> sequence_words(const TokenSequence& seq, const Vocabulary& vocab);

// Negation phrases -------------------------------------------------------

struct PhraseSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::size_t head = 0;
  bool is_negated = false;
  std::size_t length() const { return end - start; }
  friend bool operator==(const PhraseSpan&, const PhraseSpan&) = default;
};

using NegationList = std::set<std::string>;

NegationList default_negation_list();
const std::set<std::string>& stopwords();
NegationList load_negation_list(const std::filesystem::path& path);
void save_negation_list(const NegationList& list, const std::filesystem::path& path);

// Partitions [0, words.size()) into spans. A negation word opens a span that
// runs through the next content word (first token that is neither a stopword
// nor another negation word); that content word is the head. Everything else
// is a singleton. Throws InputError when np_list is empty.
std::vector<PhraseSpan> chunk_negation_phrases(std::span<const std::string> words,
                                               const NegationList& np_list);
std::vector<PhraseSpan> chunk_negation_phrases(const TokenSequence& seq,
                                               const Vocabulary& vocab,
                                               const NegationList& np_list);

}  // namespace cfx

#endif  // CFX_TEXT_H_
