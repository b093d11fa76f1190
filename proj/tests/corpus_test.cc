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

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "cfx/corpus.h"
#include "cfx/error.h"
#include "cfx/text.h"

namespace cfx {
namespace {

std::vector<Document> small_corpus(std::size_t n, std::uint64_t seed, double noise = 0.05) {
  SynthConfig c;
  c.n_docs = n;
  c.seed = seed;
  c.noise_rate = noise;
  return generate_synthetic(c);
}

TEST(Synthetic, BalancedAndDeterministic) {
  const auto a = small_corpus(4000, 42);
  ASSERT_EQ(a.size(), 4000u);
  std::size_t completed = 0;
  for (const auto& d : a) completed += d.label == Label::kCompleted;
  EXPECT_EQ(completed, 2000u);
  const auto b = small_corpus(100, 7), c = small_corpus(100, 7);
  EXPECT_EQ(b, c);
  EXPECT_NE(small_corpus(100, 8), b);
}

TEST(Synthetic, CueSetsAreDisjoint) {
  const TemplateBank bank = default_template_bank();
  const auto pos = bank.positive_cues(), neg = bank.negative_cues();
  EXPECT_FALSE(pos.empty());
  EXPECT_FALSE(neg.empty());
  for (const auto& w : pos) EXPECT_FALSE(neg.count(w)) << w;
}

TEST(Synthetic, CompletedDocumentsCarryPositiveCueWithoutNoise) {
  const auto docs = small_corpus(100, 7, 0.0);
  const auto pos = default_template_bank().positive_cues();
  const auto neg = default_template_bank().negative_cues();
  for (const auto& d : docs) {
    const auto words = lowercase_words(d.text);
    bool has_pos = false, has_neg = false;
    for (const auto& w : words) {
      has_pos |= pos.count(w) > 0;
      has_neg |= neg.count(w) > 0;
    }
    if (d.label == Label::kCompleted) {
      EXPECT_TRUE(has_pos) << d.text;
      EXPECT_FALSE(has_neg) << d.text;
    } else {
      EXPECT_TRUE(has_neg) << d.text;
    }
  }
}

TEST(Synthetic, MetadataPopulated) {
  for (const auto& d : small_corpus(50, 3)) {
    EXPECT_FALSE(d.id.empty());
    EXPECT_FALSE(d.acquirer.empty());
    EXPECT_FALSE(d.target.empty());
    EXPECT_NE(d.acquirer, d.target);
    EXPECT_GE(year_of(d.published), 2000);
    EXPECT_LE(year_of(d.published), 2024);
    EXPECT_EQ(d.announce.has_value(), d.label == Label::kCompleted);
  }
}

TEST(Synthetic, InvalidConfigRejected) {
  SynthConfig c;
  c.n_docs = 9;
  EXPECT_THROW(c.validate(), ConfigError);
  c.n_docs = 10;
  c.noise_rate = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.noise_rate = 0.0;
  c.year_range = {2010, 2009};
  EXPECT_THROW(c.validate(), ConfigError);
}

Document doc_at(const std::string& id, Label l, const std::string& pub,
                std::optional<std::string> ann, bool us = true) {
  Document d;
  d.id = id;
  d.text = "x";
  d.label = l;
  d.published = parse_date(pub);
  if (ann) d.announce = parse_date(*ann);
  d.acquirer = "A";
  d.target = "B";
  d.acquirer_us = us;
  return d;
}

TEST(Preprocess, FiltersListingAndTiming) {
  const SplitPolicy policy{{2000, 2000}, {2001, 2001}, {2002, 2002}};
  std::vector<Document> docs = {
      doc_at("keep", Label::kCompleted, "2000-03-01", "2000-03-02"),
      doc_at("same-day", Label::kCompleted, "2000-03-01", "2000-03-01"),
      doc_at("after", Label::kCompleted, "2000-03-05", "2000-03-01"),
      doc_at("non-us", Label::kRumour, "2000-03-01", std::nullopt, false),
      doc_at("r", Label::kRumour, "2000-05-01", std::nullopt),
      doc_at("v", Label::kRumour, "2001-05-01", std::nullopt),
      doc_at("t", Label::kRumour, "2002-05-01", std::nullopt),
  };
  const SplitDataset s = preprocess_split(docs, policy);
  std::set<std::string> train_ids;
  for (const auto& d : s.train) train_ids.insert(d.id);
  EXPECT_EQ(train_ids, (std::set<std::string>{"keep", "r"}));
  ASSERT_EQ(s.validation.size(), 1u);
  ASSERT_EQ(s.test.size(), 1u);
}

TEST(Preprocess, OversamplesEachTrainingYearToBalance) {
  const auto docs = small_corpus(4000, 42);
  const SplitDataset s = preprocess_split(docs, SplitPolicy{}, 0);
  std::map<int, std::array<std::size_t, 2>> counts;
  for (const auto& d : s.train) ++counts[year_of(d.published)][to_index(d.label)];
  EXPECT_EQ(counts.size(), 19u);
  for (const auto& [y, c] : counts) EXPECT_EQ(c[0], c[1]) << y;
  for (const auto& d : s.validation) EXPECT_TRUE(SplitPolicy{}.validation.contains(year_of(d.published)));
  for (const auto& d : s.test) EXPECT_TRUE(SplitPolicy{}.test.contains(year_of(d.published)));
  // Same seed, same oversampling.
  EXPECT_EQ(preprocess_split(docs, SplitPolicy{}, 0).train, s.train);
}

TEST(Preprocess, EmptySplitNamed) {
  const SplitPolicy policy{{2000, 2000}, {2001, 2001}, {2002, 2002}};
  std::vector<Document> docs = {doc_at("a", Label::kRumour, "2000-05-01", std::nullopt),
                                doc_at("b", Label::kCompleted, "2000-05-01", "2000-06-01"),
                                doc_at("c", Label::kRumour, "2002-05-01", std::nullopt)};
  try {
    preprocess_split(docs, policy);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("validation"), std::string::npos);
  }
}

TEST(CorpusIo, JsonlRoundTrip) {
  const auto docs = small_corpus(30, 5);
  const auto path = std::filesystem::temp_directory_path() / "cfx_corpus_test.jsonl";
  save_corpus(docs, path);
  EXPECT_EQ(load_corpus(path), docs);
  std::filesystem::remove(path);
}

TEST(CorpusIo, MalformedLinesReportLineNumber) {
  const auto path = std::filesystem::temp_directory_path() / "cfx_corpus_bad.jsonl";
  const auto docs = small_corpus(10, 5);
  {
    std::ofstream f(path);
    f << document_to_json(docs[0]) << "\n{not json\n";
  }
  try {
    load_corpus(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  {
    std::ofstream f(path);
    f << R"({"id":"x","text":"t","label":"maybe","published":"2001-01-01","announce":null,)"
         R"("acquirer":"a","target":"b","acquirer_us":true,"target_us":false})"
      << "\n";
  }
  EXPECT_THROW(load_corpus(path), SchemaError);
  std::filesystem::remove(path);
}

TEST(CorpusIo, DateFormatting) {
  EXPECT_EQ(format_date(parse_date("2019-02-28")), "2019-02-28");
  EXPECT_THROW(parse_date("2019-2-28x"), InputError);
  EXPECT_THROW(parse_date("2019-02-30"), InputError);
}

}  // namespace
}  // namespace cfx
