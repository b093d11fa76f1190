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
#include <set>

#include <gtest/gtest.h>

#include "cfx/error.h"
#include "cfx/mlm.h"
#include "fixtures.h"

namespace cfx {
namespace {

using cfx::testing::trained;

bool contains_word(const SubstituteList& subs, const std::string& w) {
  return std::any_of(subs.begin(), subs.end(), [&](const Substitute& s) { return s.word == w; });
}

TEST(MaskSampling, AtLeastOnePositionAndRateRespected) {
  Rng rng(3);
  std::size_t total = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto pos = sample_mask_positions(20, 0.15, rng);
    ASSERT_FALSE(pos.empty());
    EXPECT_TRUE(std::is_sorted(pos.begin(), pos.end()));
    total += pos.size();
  }
  EXPECT_NEAR(static_cast<double>(total) / (2000.0 * 20.0), 0.15, 0.02);
  EXPECT_EQ(sample_mask_positions(1, 0.01, rng).size(), 1u);
}

TEST(MlmConfig, ZeroMaskRateRejected) {
  MlmTrainConfig c;
  c.mask_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(MlmTraining, TooFewDocumentsRejected) {
  ModelConfig m = testing::small_model();
  MlmTrainConfig c;
  c.model = m;
  std::vector<EncodedDocument> docs(99, EncodedDocument{{4, 5, 6}, Label::kCompleted});
  EXPECT_THROW(train_mlm(docs, {}, 10, c), DataError);
}

TEST(MlmTraining, ZeroEpochsReturnsInitialParameters) {
  MlmTrainConfig c;
  c.model = testing::small_model();
  c.train.epochs = 0;
  std::vector<EncodedDocument> docs(100, EncodedDocument{{4, 5, 6}, Label::kCompleted});
  const auto r = train_mlm(docs, {}, 10, c);
  ModelConfig m = c.model;
  m.vocab_size = 10;
  EXPECT_EQ(r.params.out_w, init_mlm(m, c.train.seed).out_w);
  EXPECT_TRUE(r.log.empty());
}

TEST(MlmInference, DistributionsAreNormalized) {
  const auto& t = trained();
  const TokenSequence doc = tokenize(t.data.test[0].text, t.clf.vocab, 128);
  std::vector<std::size_t> pos = {0, doc.size() / 2, doc.size() - 1};
  const auto dists = masked_distributions(doc.ids, pos, t.mlm.params);
  ASSERT_EQ(dists.size(), 3u);
  for (const auto& d : dists) {
    EXPECT_EQ(d.size(), t.clf.vocab.size());
    double s = 0;
    for (double p : d) {
      EXPECT_GE(p, 0.0);
      s += p;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  const std::vector<std::size_t> dup = {1, 1};
  EXPECT_THROW(masked_distributions(doc.ids, dup, t.mlm.params), InputError);
  const std::vector<std::size_t> out = {doc.size()};
  EXPECT_THROW(masked_distributions(doc.ids, out, t.mlm.params), InputError);
}

TEST(MlmInference, SubstitutesExcludeSpecialsAndOriginal) {
  const auto& t = trained();
  for (std::size_t d = 0; d < 10; ++d) {
    const TokenSequence doc = tokenize(t.data.test[d].text, t.clf.vocab, 128);
    for (std::size_t p = 0; p < doc.size(); p += 3) {
      const auto subs = predict_substitutes(doc, p, 15, t.mlm.params, t.clf.vocab);
      EXPECT_EQ(subs.size(), 15u);
      for (std::size_t i = 0; i < subs.size(); ++i) {
        EXPECT_FALSE(Vocabulary::is_special(subs[i].id));
        EXPECT_NE(subs[i].id, doc.ids[p]);
        if (i > 0) {
          EXPECT_GE(subs[i - 1].probability, subs[i].probability);
        }
      }
    }
  }
  const TokenSequence doc = tokenize("acme is buying globex", t.clf.vocab);
  EXPECT_TRUE(predict_substitutes(doc, 1, 0, t.mlm.params, t.clf.vocab).empty());
  EXPECT_THROW(predict_substitutes(doc, 4, 5, t.mlm.params, t.clf.vocab), InputError);
}

TEST(MlmInference, TemplateSlotRecallsBothClassesOfFill) {
  const auto& t = trained();
  const TokenSequence doc = tokenize("Acme is considering a merger with Globex", t.clf.vocab);
  const auto subs = predict_substitutes(doc, 2, 20, t.mlm.params, t.clf.vocab);
  EXPECT_TRUE(contains_word(subs, "announcing"));
  EXPECT_TRUE(contains_word(subs, "exploring") || contains_word(subs, "weighing") ||
              contains_word(subs, "discussing"));
  const TokenSequence doc2 = tokenize("Acme is announcing a merger with Globex", t.clf.vocab);
  EXPECT_TRUE(contains_word(predict_substitutes(doc2, 2, 20, t.mlm.params, t.clf.vocab),
                            "considering"));
}

TEST(MlmInference, ReconstructChangesOnlyMaskedPositions) {
  const auto& t = trained();
  const TokenSequence doc = tokenize(t.data.test[3].text, t.clf.vocab, 128);
  EXPECT_EQ(reconstruct(doc, {}, t.mlm.params, t.clf.vocab), doc);
  const std::vector<std::size_t> pos = {1, 4};
  const TokenSequence r = reconstruct(doc, pos, t.mlm.params, t.clf.vocab);
  ASSERT_EQ(r.size(), doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (i == 1 || i == 4) {
      EXPECT_FALSE(Vocabulary::is_special(r.ids[i]));
    } else {
      EXPECT_EQ(r.ids[i], doc.ids[i]);
      EXPECT_EQ(r.surface[i], doc.surface[i]);
    }
  }
  std::vector<std::size_t> all(doc.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  EXPECT_EQ(reconstruct(doc, all, t.mlm.params, t.clf.vocab).size(), doc.size());
}

TEST(MlmInference, TemplateSlotReconstructsToLegalFill) {
  const auto& t = trained();
  const TokenSequence doc = tokenize("Acme is considering a merger with Globex", t.clf.vocab);
  const std::vector<std::size_t> pos = {2};
  const TokenSequence r = reconstruct(doc, pos, t.mlm.params, t.clf.vocab);
  const std::set<std::string> legal = {"announcing", "finalizing", "completing", "considering",
                                       "exploring",  "weighing",   "discussing"};
  EXPECT_TRUE(legal.count(t.clf.vocab.token(r.ids[2]))) << t.clf.vocab.token(r.ids[2]);
}

TEST(MlmInference, HeldOutAccuracyWellAboveChance) {
  const auto& t = trained();
  const auto enc = encode_documents(t.data.test, t.clf.vocab, 128);
  const auto [top1, top5] = masked_accuracy(enc, t.mlm.params, 0.15, 1);
  EXPECT_GT(top5, 0.5);
  EXPECT_LE(top1, top5);
}

}  // namespace
}  // namespace cfx
