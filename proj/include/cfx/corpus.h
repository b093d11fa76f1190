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

#ifndef CFX_CORPUS_H_
#define CFX_CORPUS_H_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace cfx {

// Completed is the positive class (index 0); Rumour is index 1.
enum class Label : int { kCompleted = 0, kRumour = 1 };

inline int to_index(Label l) { return static_cast<int>(l); }
inline Label label_from_index(int i) { return i == 0 ? Label::kCompleted : Label::kRumour; }
const char* label_name(Label l);  // "completed" / "rumour"
Label parse_label(const std::string& s);  // SchemaError on anything else

using Date = std::chrono::sys_days;
std::string format_date(Date d);
Date parse_date(const std::string& s);  // InputError when not YYYY-MM-DD
int year_of(Date d);

struct Document {
  std::string id;
  std::string text;
  Label label = Label::kCompleted;
  Date published{};
  std::optional<Date> announce;
  std::string acquirer;
  std::string target;
  bool acquirer_us = false;
  bool target_us = false;

  friend bool operator==(const Document&, const Document&) = default;
};

// Sentence templates used by the synthetic generator. Each cue template has
// a single "{cue}" slot filled from a class-specific list; both classes share
// the template so a masked language model sees both kinds of fill in context.
struct CueTemplate {
  std::string pattern;
  std::vector<std::string> completed_fills;
  std::vector<std::string> rumour_fills;
};

struct TemplateBank {
  std::vector<CueTemplate> cue_templates;
  std::vector<std::string> filler_templates;
  std::vector<std::string> distractors;
  std::vector<std::string> companies;
  std::vector<std::string> cities;
  std::vector<std::string> industries;
  std::vector<std::string> amounts;
  std::vector<std::string> days;
  std::vector<std::string> adverbs;

  // Words of the completed fills.
  std::set<std::string> positive_cues() const;
  // Words of the rumour fills that are not positive cues (this includes the
  // negation words of phrases such as "not closing").
  std::set<std::string> negative_cues() const;
};

TemplateBank default_template_bank();

struct SynthConfig {
  std::size_t n_docs = 4000;
  std::uint64_t seed = 42;
  TemplateBank template_bank = default_template_bank();
  double noise_rate = 0.05;
  std::pair<int, int> year_range{2000, 2024};

  void validate() const;  // ConfigError
};

// Deterministic for a fixed seed; labels alternate so classes are balanced.
std::vector<Document> generate_synthetic(const SynthConfig& config);

struct YearRange {
  int first = 0;
  int last = 0;
  bool contains(int y) const { return y >= first && y <= last; }
};

struct SplitPolicy {
  YearRange train{2000, 2018};
  YearRange validation{2019, 2021};
  YearRange test{2022, 2024};
};

struct SplitDataset {
  std::vector<Document> train;
  std::vector<Document> validation;
  std::vector<Document> test;
  SplitPolicy policy;
};

// Keeps documents with at least one US-listed party that were published at
// least one day before any announcement, splits them by publication year and
// oversamples the training minority class (with replacement, seeded) so every
// training year is balanced. Validation and test are left untouched.
SplitDataset preprocess_split(const std::vector<Document>& docs, const SplitPolicy& policy,
                              std::uint64_t seed = 0);

// JSONL corpus files.
std::string document_to_json(const Document& doc);
std::vector<Document> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::vector<Document>& docs, const std::filesystem::path& path);

}  // namespace cfx

#endif  // CFX_CORPUS_H_
