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

#ifndef CFX_CFGEN_H_
#define CFX_CFGEN_H_

#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cfx/mlm.h"
#include "cfx/model.h"
#include "cfx/scd.h"
#include "cfx/text.h"

namespace cfx {

enum class CfMethod { kRep, kRm, kIns, kHotflip };
const char* cf_method_name(CfMethod m);
CfMethod parse_cf_method(const std::string& s);  // ConfigError

enum class EditOp { kReplace, kDelete, kInsert };
const char* edit_op_name(EditOp op);

// `position` indexes the document as it was when the edit was applied. A
// delete removes the words of `old_text`; an insert puts `new_text` at
// `position`, shifting the rest right.
struct Edit {
  std::size_t position = 0;
  EditOp op = EditOp::kReplace;
  std::string old_text;
  std::string new_text;
  friend bool operator==(const Edit&, const Edit&) = default;
};

struct Counterfactual {
  CfMethod method = CfMethod::kRep;
  TokenSequence revised;
  std::vector<Edit> edits;
  std::vector<double> original_logits;
  std::vector<double> revised_logits;
  std::size_t n_edits() const { return edits.size(); }
};

struct CounterfactualSet {
  Prediction original;
  std::vector<Counterfactual> items;  // at most one per method
  bool empty() const { return items.empty(); }
};

inline constexpr std::size_t kUnboundedEdits = std::numeric_limits<std::size_t>::max();

struct CfConfig {
  std::size_t k = 20;                       // MLM candidates per slot
  std::optional<std::size_t> max_edits;     // default min(10, ceil(0.2 n))
  std::optional<std::size_t> rm_max_edits;  // defaults to max_edits
  std::set<CfMethod> methods = {CfMethod::kRep, CfMethod::kRm, CfMethod::kIns};

  void validate() const;
  std::size_t budget(std::size_t n_tokens) const;
  std::size_t rm_budget(std::size_t n_tokens) const;
};

// Replays edits on `original`. Throws InputError when an edit does not match
// the text it claims to change.
TokenSequence apply_edits(const TokenSequence& original, const std::vector<Edit>& edits,
                          const Vocabulary& vocab);

// Greedy search over positions in descending |score| (earlier position on
// ties). Each method accumulates its own edits and stops at its first flip;
// an edit is only kept when it raises the margin of the opposite class.
// REP and INS candidates are MLM suggestions that also appear in the
// lexicon of the opposite class. The target class is the opposite of the
// model's prediction.
CounterfactualSet generate(const TokenSequence& doc, const ModelParams& params,
                           const MlmParams& mlm, const Vocabulary& vocab, const Lexicons& lex,
                           const ImportanceProfile& profile, const CfConfig& cfg);

// Gradient-guided substitution without lexicon or MLM constraints. Each step
// picks the unedited position and vocabulary word with the largest
// first-order gain toward the opposite class. Empty when no flip happens
// within budget.
std::optional<Counterfactual> hotflip_baseline(const TokenSequence& doc,
                                               const ModelParams& params,
                                               const Vocabulary& vocab, const CfConfig& cfg);

struct Plausibility {
  double value = 0.0;  // mean log-probability of replaced/inserted tokens
  std::size_t tokens = 0;
  bool empty = true;   // no replaced or inserted token to score
};

// Each replaced or inserted token is masked alone in the revised document and
// scored by the MLM.
Plausibility plausibility_proxy(const Counterfactual& cf, const MlmParams& mlm);

// Positions in `cf.revised` holding tokens introduced by replace/insert edits.
std::vector<std::size_t> edited_positions(const Counterfactual& cf);

}  // namespace cfx

#endif  // CFX_CFGEN_H_
