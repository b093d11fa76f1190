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

#include "cfx/text.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

#include "cfx/error.h"

namespace cfx {
namespace {

const char* const kSpecialNames[kNumSpecialTokens] = {"[PAD]", "[UNK]", "[MASK]", "[CLS]"};

bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::string to_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  for (int i = 0; i < kNumSpecialTokens; ++i) {
    tokens_.push_back(kSpecialNames[i]);
    freqs_.push_back(0);
    index_.emplace(kSpecialNames[i], i);
  }
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> documents,
                             std::size_t min_freq) {
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : documents)
    for (const auto& w : doc) ++counts[w];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [w, c] : counts) {
    if (c >= min_freq) kept.emplace_back(w, c);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  v.min_freq_ = min_freq;
  for (auto& [w, c] : kept) {
    if (v.index_.count(w)) continue;
    v.index_.emplace(w, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(w);
    v.freqs_.push_back(c);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens,
                                   std::vector<std::size_t> freqs) {
  if (!freqs.empty() && freqs.size() != tokens.size()) {
    throw InputError("vocabulary: token and frequency counts differ");
  }
  Vocabulary v;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::size_t f = freqs.empty() ? 0 : freqs[i];
    if (i < static_cast<std::size_t>(kNumSpecialTokens)) {
      if (tokens[i] != kSpecialNames[i]) {
        throw SchemaError("vocabulary: id " + std::to_string(i) + " must be " +
                          kSpecialNames[i]);
      }
      v.freqs_[i] = f;
      continue;
    }
    if (!v.index_.emplace(tokens[i], static_cast<int>(v.tokens_.size())).second) {
      throw SchemaError("vocabulary: duplicate token '" + tokens[i] + "'");
    }
    v.tokens_.push_back(tokens[i]);
    v.freqs_.push_back(f);
  }
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw InputError("vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out << tokens_[i] << '\t' << i << '\t' << freqs_[i] << '\n';
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<std::string> tokens;
  std::vector<std::size_t> freqs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok, id_s, freq_s;
    if (!std::getline(ls, tok, '\t') || !std::getline(ls, id_s, '\t') ||
        !std::getline(ls, freq_s)) {
      throw ParseError("expected token<TAB>id<TAB>frequency", lineno);
    }
    try {
      if (std::stoul(id_s) != tokens.size()) throw ParseError("ids must be consecutive", lineno);
      freqs.push_back(std::stoul(freq_s));
    } catch (const std::logic_error&) {
      throw ParseError("malformed number", lineno);
    }
    tokens.push_back(tok);
  }
  return from_tokens(std::move(tokens), std::move(freqs));
}

// ---------------------------------------------------------------------------
// Tokenization

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      flush();
    } else if (is_word_char(c)) {
      cur.push_back(static_cast<char>(c));
    } else if (c == '\'' && !cur.empty() && i + 1 < n &&
               std::isalpha(static_cast<unsigned char>(text[i + 1]))) {
      std::size_t j = i + 1;
      while (j < n && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
      std::string clitic = text.substr(i + 1, j - i - 1);
      if ((clitic == "t" || clitic == "T") && cur.size() > 1 &&
          std::tolower(static_cast<unsigned char>(cur.back())) == 'n') {
        const char n_char = cur.back();
        cur.pop_back();
        flush();
        out.push_back(std::string(1, n_char) + "'" + clitic);
      } else {
        flush();
        out.push_back("'" + clitic);
      }
      i = j - 1;
    } else if ((c == '.' || c == ',') && !cur.empty() &&
               std::isdigit(static_cast<unsigned char>(cur.back())) && i + 1 < n &&
               std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
      cur.push_back(static_cast<char>(c));
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

std::vector<std::string> lowercase_words(const std::string& text) {
  auto words = split_words(text);
  for (auto& w : words) w = to_lower(std::move(w));
  return words;
}

TokenSequence tokenize(const std::string& text, const Vocabulary& vocab, std::size_t max_len) {
  TokenSequence seq;
  auto words = split_words(text);
  if (words.size() > max_len) words.resize(max_len);
  seq.ids.reserve(words.size());
  for (auto& w : words) {
    seq.ids.push_back(vocab.id(to_lower(w)));
    seq.surface.push_back(std::move(w));
  }
  return seq;
}

std::string detokenize(const TokenSequence& seq) {
  auto attaches = [](const std::string& w) {
    if (w.empty()) return false;
    if (w[0] == '\'') return true;
    if (to_lower(w) == "n't") return true;
    return w.size() == 1 && std::string_view(",.;:!?)%").find(w[0]) != std::string_view::npos;
  };
  std::string out;
  for (std::size_t i = 0; i < seq.surface.size(); ++i) {
    if (i && !attaches(seq.surface[i])) out.push_back(' ');
    out += seq.surface[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Negation phrases

NegationList default_negation_list() {
  return {"not", "no", "n't", "never", "without", "neither", "nor", "cannot", "hardly"};
}

const std::set<std::string>& stopwords() {
  static const std::set<std::string> kStop = {
      "a",    "an",   "the",  "is",   "are",  "was",  "were", "be",   "been", "being",
      "am",   "to",   "of",   "in",   "on",   "at",   "for",  "with", "by",   "from",
      "and",  "or",   "but",  "it",   "its",  "as",   "that", "than", "then", "there",
      "so",   "yet",  "also", "just", "even", "any",  "all",  "some", "such", "own",
      "very", "too",  "more", "most", ",",    ".",    ";",    ":",    "-",    "'s"};
  return kStop;
}

NegationList load_negation_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  NegationList list;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t b = 0;
    while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    if (b < line.size()) list.insert(to_lower(line.substr(b)));
  }
  return list;
}

void save_negation_list(const NegationList& list, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& w : list) out << w << '\n';
}

std::vector<PhraseSpan> chunk_negation_phrases(std::span<const std::string> words,
                                               const NegationList& np_list) {
  if (np_list.empty()) throw InputError("negation list must not be empty");
  const auto& stop = stopwords();
  std::vector<PhraseSpan> spans;
  const std::size_t n = words.size();
  std::size_t i = 0;
  while (i < n) {
    if (np_list.count(words[i])) {
      std::size_t j = i + 1;
      while (j < n && (stop.count(words[j]) || np_list.count(words[j]))) ++j;
      if (j < n) {
        spans.push_back({i, j + 1, j, true});
        i = j + 1;
        continue;
      }
    }
    spans.push_back({i, i + 1, i, false});
    ++i;
  }
  return spans;
}

std::vector<std::string> sequence_words(const TokenSequence& seq, const Vocabulary& vocab) {
  std::vector<std::string> words;
  words.reserve(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    words.push_back(seq.ids[i] == kUnk && i < seq.surface.size() ? to_lower(seq.surface[i])
                                                                 : vocab.token(seq.ids[i]));
  }
  return words;
}

std::vector<PhraseSpan> chunk_negation_phrases(const TokenSequence& seq,
                                               const Vocabulary& vocab,
                                               const NegationList& np_list) {
  return chunk_negation_phrases(sequence_words(seq, vocab), np_list);
}

}  // namespace cfx
