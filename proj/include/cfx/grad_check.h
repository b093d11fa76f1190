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

#ifndef CFX_GRAD_CHECK_H_
#define CFX_GRAD_CHECK_H_

#include <functional>
#include <span>

#include "cfx/autodiff.h"

namespace cfx {

// A scalar-valued function recorded on a tape, differentiable in `x`.
using ScalarFn = std::function<Var(Tape&, Var x)>;

// Compares the tape gradient of f at x against central differences with step
// h. Returns max over coordinates of |analytic - numeric| / max(1, |analytic|).
// Throws NumericError when f(x) is not finite and ConfigError when h <= 0.
double grad_check(const ScalarFn& f, const Tensor& x, double h = 1e-5);

// Same check over a whole parameter set. `loss` records the loss on a fresh
// tape, registering each params[i] with gradient buffer grads[i]. The
// parameters are perturbed in place and restored; grads are overwritten.
using LossFn = std::function<Var(Tape&)>;
double grad_check(const LossFn& loss, std::span<Tensor* const> params,
                  std::span<Tensor* const> grads, double h = 1e-5);

}  // namespace cfx

#endif  // CFX_GRAD_CHECK_H_
