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

#include <gtest/gtest.h>

#include "cfx/cfgen.h"
#include "cfx/error.h"
#include "cfx/scd.h"
#include "fixtures.h"

namespace cfx {
namespace {

using cfx::testing::trained;

const std::vector<TokenSequence>& test_sequences() {
  static const std::vector<TokenSequence> seqs = [] {
    const auto& t = trained();
    std::vector<TokenSequence> out;
    for (const auto& d : t.data.test) out.push_back(tokenize(d.text, t.clf.vocab, 128));
    return out;
  }();
  return seqs;
}

const ScdPool& pool() {
  static const ScdPool p(test_sequences(), trained().clf.params, trained().clf.vocab);
  return p;
}

// Lexicons from the fixture's test split, built once per process.
const Lexicons& lexicons() {
  static const Lexicons lex = [] {
    const auto& t = trained();
    ScdConfig c;
    c.beta = 1;
    return build_lexicons(test_sequences(), t.clf.params, t.clf.vocab, c);
  }();
  return lex;
}

struct Explained {
  TokenSequence doc;
  ImportanceProfile profile;
  CounterfactualSet set;
};

Explained explain(const std::string& text, const CfConfig& cfg = {}) {
  const auto& t = trained();
  Explained e;
  e.doc = tokenize(text, t.clf.vocab, 128);
  e.profile = importance(e.doc, t.clf.params, &pool(), t.clf.vocab, {});
  e.set = generate(e.doc, t.clf.params, t.mlm.params, t.clf.vocab, lexicons(), e.profile, cfg);
  return e;
}

TEST(CfConfig, DefaultBudget) {
  CfConfig c;
  EXPECT_EQ(c.budget(1), 1u);
  EXPECT_EQ(c.budget(11), 3u);
  EXPECT_EQ(c.budget(200), 10u);
  EXPECT_EQ(c.rm_budget(11), 3u);
  c.rm_max_edits = kUnboundedEdits;
  EXPECT_EQ(c.rm_budget(11), kUnboundedEdits);
  c.max_edits = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  CfConfig h;
  h.methods = {CfMethod::kHotflip};
  EXPECT_THROW(h.validate(), ConfigError);
  EXPECT_THROW(parse_cf_method("SWAP"), ConfigError);
  EXPECT_EQ(parse_cf_method("rm"), CfMethod::kRm);
}

TEST(ApplyEdits, ReplaysInsertDeleteReplace) {
  const Vocabulary v;
  const TokenSequence doc = tokenize("the deal is not closing soon", v);
  const std::vector<Edit> edits = {{3, EditOp::kDelete, "not closing", ""},
                                   {3, EditOp::kInsert, "", "closing"},
                                   {0, EditOp::kReplace, "the", "a"}};
  const TokenSequence out = apply_edits(doc, edits, v);
  EXPECT_EQ(out.surface, (std::vector<std::string>{"a", "deal", "is", "closing", "soon"}));
  Counterfactual cf;
  cf.revised = out;
  cf.edits = edits;
  EXPECT_EQ(edited_positions(cf), (std::vector<std::size_t>{0, 3}));
}

TEST(ApplyEdits, MismatchedEditRejected) {
  const Vocabulary v;
  const TokenSequence doc = tokenize("the deal is closing", v);
  EXPECT_THROW(apply_edits(doc, {{1, EditOp::kReplace, "bid", "x"}}, v), InputError);
  EXPECT_THROW(apply_edits(doc, {{3, EditOp::kDelete, "closing soon", ""}}, v), InputError);
  EXPECT_THROW(apply_edits(doc, {{5, EditOp::kInsert, "", "x"}}, v), InputError);
}

TEST(Generate, EveryCounterfactualFlipsAndReplays) {
  const auto& t = trained();
  std::size_t produced = 0;
  for (std::size_t d = 0; d < 25; ++d) {
    const Explained e = explain(t.data.test[d].text);
    for (const auto& cf : e.set.items) {
      ++produced;
      const Prediction p = predict_ids(cf.revised.ids, t.clf.params);
      EXPECT_NE(p.label, e.set.original.label) << cf_method_name(cf.method);
      EXPECT_EQ(p.logits, cf.revised_logits);
      EXPECT_EQ(apply_edits(e.doc, cf.edits, t.clf.vocab), cf.revised);
      EXPECT_GE(cf.n_edits(), 1u);
      EXPECT_LE(cf.n_edits(), CfConfig{}.budget(e.doc.size()));
    }
    // At most one counterfactual per method.
    std::vector<CfMethod> methods;
    for (const auto& cf : e.set.items) methods.push_back(cf.method);
    std::sort(methods.begin(), methods.end());
    EXPECT_EQ(std::adjacent_find(methods.begin(), methods.end()), methods.end());
  }
  EXPECT_GT(produced, 25u);
}

TEST(Generate, ReplacementsComeFromLexiconAndMlmTopK) {
  const auto& t = trained();
  CfConfig cfg;
  cfg.methods = {CfMethod::kRep};
  for (std::size_t d = 0; d < 25; ++d) {
    const Explained e = explain(t.data.test[d].text, cfg);
    const Label target = label_from_index(1 - to_index(e.set.original.label));
    for (const auto& cf : e.set.items) {
      TokenSequence state = e.doc;
      for (const Edit& ed : cf.edits) {
        ASSERT_EQ(ed.op, EditOp::kReplace);
        const auto& list = lexicons().toward(target);
        EXPECT_TRUE(std::any_of(list.begin(), list.end(),
                                [&](const LexiconEntry& x) { return x.word == ed.new_text; }));
        const auto subs = predict_substitutes(state, ed.position, cfg.k, t.mlm.params, t.clf.vocab);
        EXPECT_TRUE(std::any_of(subs.begin(), subs.end(),
                                [&](const Substitute& s) { return s.word == ed.new_text; }));
        state = apply_edits(state, {ed}, t.clf.vocab);
      }
    }
  }
}

TEST(Generate, SingleDeletionFlipGivesOneEditRm) {
  const auto& t = trained();
  std::size_t checked = 0;
  for (std::size_t d = 0; d < 40; ++d) {
    const Explained e = explain(t.data.test[d].text);
    std::size_t top = 0;
    for (std::size_t i = 1; i < e.doc.size(); ++i)
      if (std::abs(e.profile.scores[i]) > std::abs(e.profile.scores[top])) top = i;
    if (e.profile.spans[e.profile.span_index[top]].span.is_negated) continue;
    std::vector<int> ids = e.doc.ids;
    ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(top));
    if (predict_ids(ids, t.clf.params).label == e.set.original.label) continue;
    ++checked;
    const auto it = std::find_if(e.set.items.begin(), e.set.items.end(),
                                 [](const Counterfactual& c) { return c.method == CfMethod::kRm; });
    ASSERT_NE(it, e.set.items.end());
    EXPECT_EQ(it->n_edits(), 1u);
    EXPECT_EQ(it->edits[0].position, top);
  }
  EXPECT_GT(checked, 0u);
}

TEST(Generate, NegationPhraseRemovedWhole) {
  const Explained e = explain("Sources said there can be no certainty a deal will complete.");
  ASSERT_EQ(e.set.original.label, Label::kRumour);
  const auto it = std::find_if(e.set.items.begin(), e.set.items.end(),
                               [](const Counterfactual& c) { return c.method == CfMethod::kRm; });
  ASSERT_NE(it, e.set.items.end());
  EXPECT_EQ(it->edits[0].old_text, "no certainty");
}

TEST(Generate, UnboundedRemovalCoversCorrectDocuments) {
  const auto& t = trained();
  CfConfig cfg;
  cfg.rm_max_edits = kUnboundedEdits;
  for (std::size_t d = 0; d < 20; ++d) {
    const Explained e = explain(t.data.test[d].text, cfg);
    if (e.set.original.label != t.data.test[d].label) continue;
    EXPECT_FALSE(e.set.items.empty()) << t.data.test[d].text;
  }
}

TEST(Generate, ProfileMustMatchDocument) {
  const auto& t = trained();
  const TokenSequence doc = tokenize("acme is buying globex", t.clf.vocab);
  ImportanceProfile p;
  p.scores = {1.0};
  EXPECT_THROW(generate(doc, t.clf.params, t.mlm.params, t.clf.vocab, lexicons(), p, {}),
               InputError);
}

TEST(Hotflip, FlipsWithinBudgetAndZeroBudgetRejected) {
  const auto& t = trained();
  std::size_t flipped = 0;
  for (std::size_t d = 0; d < 10; ++d) {
    const TokenSequence doc = tokenize(t.data.test[d].text, t.clf.vocab, 128);
    const auto cf = hotflip_baseline(doc, t.clf.params, t.clf.vocab, {});
    if (!cf) continue;
    ++flipped;
    EXPECT_EQ(cf->method, CfMethod::kHotflip);
    EXPECT_LE(cf->n_edits(), CfConfig{}.budget(doc.size()));
    EXPECT_NE(predict_ids(cf->revised.ids, t.clf.params).label,
              predict_ids(doc.ids, t.clf.params).label);
    EXPECT_EQ(apply_edits(doc, cf->edits, t.clf.vocab), cf->revised);
  }
  EXPECT_GT(flipped, 5u);
  CfConfig zero;
  zero.max_edits = 0;
  const TokenSequence doc = tokenize("acme is buying globex", t.clf.vocab);
  EXPECT_THROW(hotflip_baseline(doc, t.clf.params, t.clf.vocab, zero), ConfigError);
}

TEST(Plausibility, EmptyForUneditedAndLowerForRandomInsert) {
  const auto& t = trained();
  Counterfactual none;
  none.revised = tokenize("acme is buying globex", t.clf.vocab);
  const Plausibility p0 = plausibility_proxy(none, t.mlm.params);
  EXPECT_TRUE(p0.empty);
  EXPECT_EQ(p0.value, 0.0);

  // REP-style fill from the MLM's own top suggestion versus an arbitrary word.
  const TokenSequence doc = tokenize("Acme is considering a merger with Globex", t.clf.vocab);
  const auto top = predict_substitutes(doc, 2, 1, t.mlm.params, t.clf.vocab).front();
  Counterfactual rep;
  rep.edits = {{2, EditOp::kReplace, "considering", top.word}};
  rep.revised = apply_edits(doc, rep.edits, t.clf.vocab);
  Counterfactual rnd;
  rnd.edits = {{2, EditOp::kInsert, "", "wednesday"}};
  rnd.revised = apply_edits(doc, rnd.edits, t.clf.vocab);
  const Plausibility pr = plausibility_proxy(rep, t.mlm.params);
  const Plausibility pn = plausibility_proxy(rnd, t.mlm.params);
  EXPECT_FALSE(pr.empty);
  EXPECT_EQ(pr.tokens, 1u);
  EXPECT_GT(pr.value, pn.value);
}

}  // namespace
}  // namespace cfx
