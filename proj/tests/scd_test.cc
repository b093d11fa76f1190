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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "cfx/error.h"
#include "cfx/scd.h"
#include "fixtures.h"

namespace cfx {
namespace {

using cfx::testing::trained;

ScdConfig beta(std::size_t b) {
  ScdConfig c;
  c.beta = b;
  return c;
}

std::vector<TokenSequence> test_sequences(std::size_t n) {
  const auto& t = trained();
  std::vector<TokenSequence> out;
  for (std::size_t i = 0; i < n && i < t.data.test.size(); ++i)
    out.push_back(tokenize(t.data.test[i].text, t.clf.vocab, 128));
  return out;
}

TEST(Importance, SingleSampleEqualsDirectMaskingDrop) {
  const auto& t = trained();
  for (const TokenSequence& doc : test_sequences(10)) {
    const ImportanceProfile p = importance(doc, t.clf.params, nullptr, t.clf.vocab, beta(1));
    const auto logits = encode_ids(doc.ids, t.clf.params);
    const std::size_t cls = logits[1] > logits[0] ? 1 : 0;
    ASSERT_EQ(p.scores.size(), doc.size());
    EXPECT_EQ(to_index(p.predicted), static_cast<int>(cls));
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const SpanScore& s = p.spans[p.span_index[i]];
      std::vector<int> masked = doc.ids;
      for (std::size_t k = s.span.start; k < s.span.end; ++k) masked[k] = kMask;
      const double drop = logits[cls] - encode_ids(masked, t.clf.params)[cls];
      EXPECT_NEAR(p.scores[i], s.span.is_negated ? -drop : drop, 1e-12);
      EXPECT_EQ(s.samples, 1u);
      EXPECT_FALSE(s.fallback);
    }
  }
}

TEST(Importance, NegatedHeadReceivesMinusPhraseScore) {
  const auto& t = trained();
  const TokenSequence doc = tokenize("The deal is not closing soon.", t.clf.vocab);
  const ImportanceProfile p = importance(doc, t.clf.params, nullptr, t.clf.vocab, beta(1));
  const std::size_t head = 4;
  ASSERT_EQ(p.words[head], "closing");
  const SpanScore& s = p.spans[p.span_index[head]];
  EXPECT_TRUE(s.span.is_negated);
  EXPECT_EQ(s.span.start, 3u);
  EXPECT_EQ(s.span.end, 5u);
  const double drop = masked_logit(doc.ids, 3, 5, to_index(p.predicted), t.clf.params);
  const double base = encode_ids(doc.ids, t.clf.params)[static_cast<std::size_t>(to_index(p.predicted))];
  EXPECT_NEAR(p.scores[head], -(base - drop), 1e-12);
  // The negation word keeps its own singleton score.
  EXPECT_EQ(p.span_index[3], 3u);
}

TEST(Importance, PoolSamplingIsBoundedAndDeterministic) {
  const auto& t = trained();
  const auto seqs = test_sequences(60);
  const ScdPool pool(seqs, t.clf.params, t.clf.vocab);
  for (std::size_t d = 0; d < 5; ++d) {
    const auto a = importance(seqs[d], t.clf.params, &pool, t.clf.vocab, beta(5));
    const auto b = importance(seqs[d], t.clf.params, &pool, t.clf.vocab, beta(5));
    EXPECT_EQ(a.scores, b.scores);
    for (const auto& s : a.spans) {
      EXPECT_GE(s.samples, 1u);
      EXPECT_LE(s.samples, 5u);
      EXPECT_EQ(s.fallback, s.samples == 1);
    }
  }
  // A different seed may draw different documents but keeps the bounds.
  ScdConfig other = beta(5);
  other.seed = 9;
  EXPECT_NO_THROW(importance(seqs[0], t.clf.params, &pool, t.clf.vocab, other));
}

TEST(Importance, UniquePhraseFallsBack) {
  const auto& t = trained();
  const auto seqs = test_sequences(30);
  const ScdPool pool(seqs, t.clf.params, t.clf.vocab);
  const TokenSequence doc = tokenize("Acme zyzzyva the deal.", t.clf.vocab);
  const auto p = importance(doc, t.clf.params, &pool, t.clf.vocab, beta(5));
  // "zyzzyva" maps to [UNK]-surface word that no pool document contains.
  EXPECT_TRUE(p.spans[1].fallback);
  EXPECT_EQ(p.spans[1].samples, 1u);
}

TEST(Importance, PoolFindsFirstOccurrence) {
  const auto& t = trained();
  std::vector<TokenSequence> seqs = {tokenize("a deal is a deal", t.clf.vocab),
                                     tokenize("no deal", t.clf.vocab)};
  const ScdPool pool(seqs, t.clf.params, t.clf.vocab);
  const std::vector<std::string> phrase = {"a", "deal"};
  EXPECT_EQ(pool.find(0, phrase), 0u);
  EXPECT_EQ(pool.find(1, phrase), ScdPool::npos);
  EXPECT_EQ(pool.containing(phrase), (std::vector<std::size_t>{0}));
}

TEST(Importance, PlantedCueRanksFirst) {
  const auto& t = trained();
  const auto pos = default_template_bank().positive_cues();
  const auto neg = default_template_bank().negative_cues();
  std::size_t hits = 0, total = 0;
  const auto seqs = test_sequences(t.data.test.size());
  const ScdPool pool(seqs, t.clf.params, t.clf.vocab);
  for (std::size_t d = 0; d < 40; ++d) {
    const auto p = importance(seqs[d], t.clf.params, &pool, t.clf.vocab, beta(5));
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.scores.size(); ++i)
      if (std::abs(p.scores[i]) > std::abs(p.scores[best])) best = i;
    ++total;
    hits += pos.count(p.words[best]) || neg.count(p.words[best]);
  }
  EXPECT_GE(static_cast<double>(hits) / static_cast<double>(total), 0.9);
}

TEST(Lexicons, DisjointSortedAndCuesSeparated) {
  const auto& t = trained();
  const auto seqs = test_sequences(150);
  const Lexicons lex = build_lexicons(seqs, t.clf.params, t.clf.vocab, beta(3));
  for (const auto& e : lex.pos) EXPECT_FALSE(lex.in_neg(e.word)) << e.word;
  for (const auto* list : {&lex.pos, &lex.neg})
    for (std::size_t i = 1; i < list->size(); ++i)
      EXPECT_GE((*list)[i - 1].sensitivity, (*list)[i].sensitivity);
  // Strong single-word cues of each class.
  for (const char* w : {"announced", "agreement", "approved"}) EXPECT_TRUE(lex.in_pos(w)) << w;
  for (const char* w : {"considering", "talks", "mulled"}) EXPECT_TRUE(lex.in_neg(w)) << w;
  EXPECT_FALSE(lex.in_pos("qqq") || lex.in_neg("qqq"));
}

TEST(Lexicons, TsvRoundTripAndErrors) {
  Lexicons lex;
  lex.pos = {{"announced", Polarity::kPos, 5.841}, {"agreement", Polarity::kPos, 1.5}};
  lex.neg = {{"talks", Polarity::kNeg, 2.25}};
  const auto path = std::filesystem::temp_directory_path() / "cfx_lex_test.tsv";
  save_lexicons(lex, path);
  {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    EXPECT_EQ(first, "announced\tPOS\t5.841000");
  }
  const Lexicons back = load_lexicons(path);
  ASSERT_EQ(back.pos.size(), 2u);
  ASSERT_EQ(back.neg.size(), 1u);
  EXPECT_EQ(back.neg[0].word, "talks");
  EXPECT_DOUBLE_EQ(back.pos[1].sensitivity, 1.5);

  auto write = [&](const std::string& s) {
    std::ofstream f(path);
    f << s;
  };
  write("a\tPOS\t1.0\nb\tPOS\n");
  try {
    load_lexicons(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  write("a\tPOS\t1.0\na\tNEG\t2.0\n");
  EXPECT_THROW(load_lexicons(path), SchemaError);
  write("a\tMAYBE\t1.0\n");
  EXPECT_THROW(load_lexicons(path), SchemaError);
  write("a\tPOS\tabc\n");
  EXPECT_THROW(load_lexicons(path), ParseError);
  std::filesystem::remove(path);
}

TEST(ScdConfig, Validation) {
  ScdConfig c;
  c.beta = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.beta = 1;
  c.negations.clear();
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace cfx
