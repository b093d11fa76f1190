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

#ifndef CFX_AUTODIFF_H_
#define CFX_AUTODIFF_H_

#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "cfx/tensor.h"

namespace cfx {

// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

class Tape;
using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

// Reverse-mode operation tape. One tape covers one forward pass; values are
// immutable once recorded. Parameters are borrowed (not copied) and their
// gradients accumulate straight into caller-owned buffers, so a tape must not
// outlive the tensors it borrows.
class Tape {
 public:
  Var constant(Tensor value);
  Var variable(Tensor value);
  // Borrows `value`. When `grad` is null the parameter is treated as constant.
  Var parameter(const Tensor& value, Tensor* grad);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  // Gradient accumulated by backward(); zeros when v received none.
  Tensor grad(Var v) const;

  // Seeds d(output)/d(output) = 1 and runs every recorded backward rule.
  // `output` must hold a single value.
  void backward(Var output);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Op-implementation interface.
  Var record(Tensor value, bool requires_grad, BackwardFn backward);
  Tensor& grad_buffer(Var v);

 private:
  struct Node {
    Tensor owned;
    const Tensor* borrowed = nullptr;
    Tensor grad;
    Tensor* external_grad = nullptr;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Registered ops. Every forward result is checked for finiteness and shapes
// are validated up front (ShapeError names both operands).
Var matmul(Tape& t, Var a, Var b);
Var transpose(Tape& t, Var a);
Var add(Tape& t, Var a, Var b);
// a (m x n) + bias (1 x n) broadcast over rows.
Var add_row(Tape& t, Var a, Var bias);
Var scale(Tape& t, Var a, double s);
Var softmax_rows(Tape& t, Var a);
// Row-wise normalisation followed by elementwise gain and bias (both 1 x n).
Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps = 1e-5);
// tanh approximation of GELU.
Var gelu(Tape& t, Var a);
Var embedding_lookup(Tape& t, Var table, std::span<const int> ids);
// Mean over rows of -log softmax(logits)[row, target[row]]; result is 1 x 1.
Var cross_entropy(Tape& t, Var logits, std::span<const int> targets);
Var select_rows(Tape& t, Var a, std::span<const std::size_t> rows);
Var concat_cols(Tape& t, std::span<const Var> parts);
// Inverted dropout. rate == 0 records an identity.
Var dropout(Tape& t, Var a, double rate, std::mt19937_64& rng);
Var sum_squares(Tape& t, Var a);

// Plain (tape-free) helpers shared by ops and tests.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
std::vector<double> softmax(std::span<const double> logits);

}  // namespace cfx

#endif  // CFX_AUTODIFF_H_
