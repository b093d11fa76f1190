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

#include <cmath>
#include <cstdint>
#include <string>

#include "cfx/advtrain.h"
#include "cfx/error.h"

namespace cfx {

Metrics compute_metrics(std::span<const Label> predictions, std::span<const Label> labels) {
  if (predictions.size() != labels.size()) {
    throw InputError("compute_metrics: " + std::to_string(predictions.size()) +
                     " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw InputError("compute_metrics: empty input");
  Metrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred_pos = predictions[i] == Label::kCompleted;
    const bool true_pos = labels[i] == Label::kCompleted;
    if (pred_pos && true_pos) ++m.tp;
    else if (!pred_pos && !true_pos) ++m.tn;
    else if (pred_pos) ++m.fp;
    else ++m.fn;
  }
  const auto tp = static_cast<std::int64_t>(m.tp), tn = static_cast<std::int64_t>(m.tn),
             fp = static_cast<std::int64_t>(m.fp), fn = static_cast<std::int64_t>(m.fn);
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(labels.size());

  const std::int64_t f1_den = 2 * tp + fp + fn;
  if (f1_den == 0) {
    m.f1_degenerate = true;
  } else {
    m.f1 = static_cast<double>(2 * tp) / static_cast<double>(f1_den);
  }

  // Product of the four margins; each is at most n so doubles hold it exactly
  // for any realistic n.
  const double den = static_cast<double>(tp + fp) * static_cast<double>(tp + fn) *
                     static_cast<double>(tn + fp) * static_cast<double>(tn + fn);
  if (den == 0.0) {
    m.mcc_degenerate = true;
  } else {
    m.mcc = static_cast<double>(tp * tn - fp * fn) / std::sqrt(den);
  }
  return m;
}

}  // namespace cfx
