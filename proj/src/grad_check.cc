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

#include "cfx/grad_check.h"

#include <algorithm>
#include <cmath>

#include "cfx/error.h"

namespace cfx {
namespace {

double evaluate(const ScalarFn& f, const Tensor& x) {
  Tape tape;
  Var out = f(tape, tape.constant(x));
  const Tensor& v = tape.value(out);
  if (v.size() != 1) throw ShapeError("grad_check: function must return a scalar");
  if (!std::isfinite(v[0])) throw NumericError("grad_check: f(x) is not finite");
  return v[0];
}

double scalar_value(Tape& tape, Var out) {
  const Tensor& v = tape.value(out);
  if (v.size() != 1) throw ShapeError("grad_check: loss must be a scalar");
  if (!std::isfinite(v[0])) throw NumericError("grad_check: loss is not finite");
  return v[0];
}

}  // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw ConfigError("grad_check: step must be positive");

  Tape tape;
  Var xv = tape.variable(x);
  Var out = f(tape, xv);
  if (tape.value(out).size() != 1) throw ShapeError("grad_check: function must return a scalar");
  if (!std::isfinite(tape.value(out)[0])) throw NumericError("grad_check: f(x) is not finite");
  tape.backward(out);
  const Tensor analytic = tape.grad(xv);

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = evaluate(f, probe);
    probe[i] = orig - h;
    const double down = evaluate(f, probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

double grad_check(const LossFn& loss, std::span<Tensor* const> params,
                  std::span<Tensor* const> grads, double h) {
  if (!(h > 0.0)) throw ConfigError("grad_check: step must be positive");
  if (params.size() != grads.size()) throw ShapeError("grad_check: params/grads size mismatch");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p]->same_shape(*grads[p])) throw ShapeError("grad_check: gradient shape mismatch");
    grads[p]->fill(0.0);
  }
  {
    Tape tape;
    Var out = loss(tape);
    scalar_value(tape, out);
    tape.backward(out);
  }
  auto value_at = [&]() {
    Tape tape;
    return scalar_value(tape, loss(tape));
  };
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& x = *params[p];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      x[i] = orig + h;
      const double up = value_at();
      x[i] = orig - h;
      const double down = value_at();
      x[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = (*grads[p])[i];
      worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
    }
  }
  return worst;
}

}  // namespace cfx
