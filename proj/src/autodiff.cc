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

#include "cfx/autodiff.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "cfx/error.h"
#include "cfx/random.h"

namespace cfx {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

// 8 doubles; GCC and Clang lower this to whatever SIMD width the target has.
typedef double Vec8 __attribute__((vector_size(64)));

inline Vec8 load8(const double* p) {
  Vec8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store8(double* p, Vec8 v) { std::memcpy(p, &v, sizeof v); }

// c (m x n) += a (m x k) * b (k x n), with a(r, p) at ap[r * rs + p * ps].
// A 4 x 16 tile of c is held in eight vector accumulators across the whole k
// loop. Every c element still sums its products in p order, so results match
// the untiled loop bit for bit.
void gemm_raw(const double* __restrict ap, std::size_t rs, std::size_t ps,
              const double* __restrict bp, double* __restrict cp, std::size_t m, std::size_t k,
              std::size_t n) {
  const std::size_t n16 = n - n % 16;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* __restrict c0 = cp + i * n;
    double* __restrict c1 = c0 + n;
    double* __restrict c2 = c1 + n;
    double* __restrict c3 = c2 + n;
    const double* a0 = ap + i * rs;
    const double* a1 = a0 + rs;
    const double* a2 = a1 + rs;
    const double* a3 = a2 + rs;
    for (std::size_t j = 0; j < n16; j += 16) {
      Vec8 x0 = load8(c0 + j), y0 = load8(c0 + j + 8);
      Vec8 x1 = load8(c1 + j), y1 = load8(c1 + j + 8);
      Vec8 x2 = load8(c2 + j), y2 = load8(c2 + j + 8);
      Vec8 x3 = load8(c3 + j), y3 = load8(c3 + j + 8);
      for (std::size_t p = 0; p < k; ++p) {
        const Vec8 bl = load8(bp + p * n + j), bh = load8(bp + p * n + j + 8);
        const double s0 = a0[p * ps], s1 = a1[p * ps], s2 = a2[p * ps], s3 = a3[p * ps];
        x0 += s0 * bl;
        y0 += s0 * bh;
        x1 += s1 * bl;
        y1 += s1 * bh;
        x2 += s2 * bl;
        y2 += s2 * bh;
        x3 += s3 * bl;
        y3 += s3 * bh;
      }
      store8(c0 + j, x0), store8(c0 + j + 8, y0);
      store8(c1 + j, x1), store8(c1 + j + 8, y1);
      store8(c2 + j, x2), store8(c2 + j + 8, y2);
      store8(c3 + j, x3), store8(c3 + j + 8, y3);
    }
    for (std::size_t p = 0; p < k && n16 < n; ++p) {
      const double* __restrict brow = bp + p * n;
      for (std::size_t j = n16; j < n; ++j) {
        const double bv = brow[j];
        c0[j] += a0[p * ps] * bv;
        c1[j] += a1[p * ps] * bv;
        c2[j] += a2[p * ps] * bv;
        c3[j] += a3[p * ps] * bv;
      }
    }
  }
  for (; i < m; ++i) {
    double* __restrict crow = cp + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ap[i * rs + p * ps];
      const double* __restrict brow = bp + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
  gemm_raw(a.values().data(), a.cols(), 1, b.values().data(), c.values().data(), a.rows(),
           a.cols(), b.cols());
}

// c (k x n) += a^T * g where a is m x k and g is m x n
void gemm_tn(const Tensor& a, const Tensor& g, Tensor& c) {
  gemm_raw(a.values().data(), 1, a.cols(), g.values().data(), c.values().data(), a.cols(),
           a.rows(), g.cols());
}

// c (m x k) += g * b^T where g is m x n and b is k x n
void gemm_nt(const Tensor& g, const Tensor& b, Tensor& c) {
  const Tensor bt = transpose(b);
  gemm_nn(g, bt, c);
}

Var finish(Tape& t, Tensor out, bool needs_grad, BackwardFn fn, const char* op) {
  require_finite(out, op);
  if (!needs_grad) fn = nullptr;
  return t.record(std::move(out), needs_grad, std::move(fn));
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor value) { return record(std::move(value), false, nullptr); }

Var Tape::variable(Tensor value) { return record(std::move(value), true, nullptr); }

Var Tape::parameter(const Tensor& value, Tensor* grad) {
  Node node;
  node.borrowed = &value;
  node.external_grad = grad;
  node.requires_grad = grad != nullptr;
  if (grad && !grad->same_shape(value)) {
    throw ShapeError("parameter gradient buffer " + shape_to_string(grad->shape()) +
                     " does not match " + shape_to_string(value.shape()));
  }
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::record(Tensor value, bool requires_grad, BackwardFn backward) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = requires_grad;
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.borrowed ? *n.borrowed : n.owned;
}

bool Tape::requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.external_grad) return *n.external_grad;
  if (n.has_grad) return n.grad;
  return Tensor::zeros_like(value(v));
}

Tensor& Tape::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.external_grad) return *n.external_grad;
  if (!n.has_grad) {
    n.grad = Tensor::zeros_like(n.borrowed ? *n.borrowed : n.owned);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(Var output) {
  if (value(output).size() != 1) {
    throw ShapeError("backward: output must be scalar, got " +
                     shape_to_string(value(output).shape()));
  }
  if (!requires_grad(output)) return;
  grad_buffer(output)[0] += 1.0;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || !n.has_grad) continue;
    // The callback may grow other nodes' grad buffers but never reallocates
    // nodes_, so holding a reference to this node's grad is safe.
    n.backward(*this, n.grad);
  }
}

// ---------------------------------------------------------------------------
// Plain helpers

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  Tensor c(a.rows(), b.cols());
  gemm_nn(a, b, c);
  return c;
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out(n, m);
  const double* src = a.values().data();
  double* dst = out.values().data();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) dst[c * m + r] = src[r * n + c];
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

// ---------------------------------------------------------------------------
// Ops

Var matmul(Tape& t, Var a, Var b) {
  Tensor out = matmul(t.value(a), t.value(b));
  const bool ga = t.requires_grad(a), gb = t.requires_grad(b);
  return finish(
      t, std::move(out), ga || gb,
      [a, b, ga, gb](Tape& tp, const Tensor& g) {
        if (ga) gemm_nt(g, tp.value(b), tp.grad_buffer(a));
        if (gb) gemm_tn(tp.value(a), g, tp.grad_buffer(b));
      },
      "matmul");
}

Var transpose(Tape& t, Var a) {
  Tensor out = transpose(t.value(a));
  return finish(
      t, std::move(out), t.requires_grad(a),
      [a](Tape& tp, const Tensor& g) {
        Tensor& ga = tp.grad_buffer(a);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) ga(c, r) += g(r, c);
      },
      "transpose");
}

Var add(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "add");
  Tensor out = t.value(a);
  out.add_scaled(t.value(b));
  const bool ga = t.requires_grad(a), gb = t.requires_grad(b);
  return finish(
      t, std::move(out), ga || gb,
      [a, b, ga, gb](Tape& tp, const Tensor& g) {
        if (ga) tp.grad_buffer(a).add_scaled(g);
        if (gb) tp.grad_buffer(b).add_scaled(g);
      },
      "add");
}

Var add_row(Tape& t, Var a, Var bias) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(bias);
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw ShapeError("add_row: shape mismatch " + shape_to_string(av.shape()) + " vs " +
                     shape_to_string(bv.shape()));
  }
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[c];
  const bool ga = t.requires_grad(a), gb = t.requires_grad(bias);
  return finish(
      t, std::move(out), ga || gb,
      [a, bias, ga, gb](Tape& tp, const Tensor& g) {
        if (ga) tp.grad_buffer(a).add_scaled(g);
        if (gb) {
          Tensor& gbias = tp.grad_buffer(bias);
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) gbias[c] += g(r, c);
        }
      },
      "add_row");
}

Var scale(Tape& t, Var a, double s) {
  Tensor out = t.value(a);
  for (double& v : out.values()) v *= s;
  return finish(
      t, std::move(out), t.requires_grad(a),
      [a, s](Tape& tp, const Tensor& g) { tp.grad_buffer(a).add_scaled(g, s); }, "scale");
}

Var softmax_rows(Tape& t, Var a) {
  const Tensor& av = t.value(a);
  Tensor out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto p = softmax(av.row_span(r));
    std::copy(p.begin(), p.end(), out.row_span(r).begin());
  }
  const Var self{t.size()};
  return finish(
      t, std::move(out), t.requires_grad(a),
      [a, self](Tape& tp, const Tensor& g) {
        const Tensor& y = tp.value(self);
        Tensor& ga = tp.grad_buffer(a);
        for (std::size_t r = 0; r < y.rows(); ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
          for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
        }
      },
      "softmax_rows");
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = t.value(x);
  const Tensor& gv = t.value(gain);
  const Tensor& bv = t.value(bias);
  const std::size_t m = xv.rows(), n = xv.cols();
  if (gv.size() != n || bv.size() != n) {
    throw ShapeError("layer_norm: shape mismatch " + shape_to_string(xv.shape()) + " vs " +
                     shape_to_string(gv.shape()));
  }
  Tensor xhat(m, n);
  std::vector<double> inv_std(m);
  Tensor out(m, n);
  for (std::size_t r = 0; r < m; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) mean += xv(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (xv(r, c) - mean) * (xv(r, c) - mean);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat(r, c) = (xv(r, c) - mean) * inv_std[r];
      out(r, c) = xhat(r, c) * gv[c] + bv[c];
    }
  }
  const bool gx = t.requires_grad(x), gg = t.requires_grad(gain), gb = t.requires_grad(bias);
  return finish(
      t, std::move(out), gx || gg || gb,
      [x, gain, bias, gx, gg, gb, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape& tp, const Tensor& g) {
        const Tensor& gv = tp.value(gain);
        const std::size_t m = g.rows(), n = g.cols();
        if (gg) {
          Tensor& ggain = tp.grad_buffer(gain);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) ggain[c] += g(r, c) * xhat(r, c);
        }
        if (gb) {
          Tensor& gbias = tp.grad_buffer(bias);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) gbias[c] += g(r, c);
        }
        if (gx) {
          Tensor& gxv = tp.grad_buffer(x);
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t r = 0; r < m; ++r) {
            double sum_d = 0.0, sum_dx = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
              const double d = g(r, c) * gv[c];
              sum_d += d;
              sum_dx += d * xhat(r, c);
            }
            for (std::size_t c = 0; c < n; ++c) {
              const double d = g(r, c) * gv[c];
              gxv(r, c) += inv_std[r] * (d - inv_n * sum_d - xhat(r, c) * inv_n * sum_dx);
            }
          }
        }
      },
      "layer_norm");
}

Var gelu(Tape& t, Var a) {
  Tensor out = t.value(a);
  for (double& v : out.values()) {
    const double u = kGeluC * (v + 0.044715 * v * v * v);
    v = 0.5 * v * (1.0 + std::tanh(u));
  }
  return finish(
      t, std::move(out), t.requires_grad(a),
      [a](Tape& tp, const Tensor& g) {
        const Tensor& x = tp.value(a);
        Tensor& ga = tp.grad_buffer(a);
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double v = x[i];
          const double u = kGeluC * (v + 0.044715 * v * v * v);
          const double th = std::tanh(u);
          const double du = kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
          ga[i] += g[i] * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du);
        }
      },
      "gelu");
}

Var embedding_lookup(Tape& t, Var table, std::span<const int> ids) {
  const Tensor& tv = t.value(table);
  const std::size_t d = tv.cols();
  Tensor out(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.rows()) {
      throw ShapeError("embedding_lookup: id " + std::to_string(ids[i]) +
                       " outside table " + shape_to_string(tv.shape()));
    }
    auto src = tv.row_span(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  return finish(
      t, std::move(out), t.requires_grad(table),
      [table, ids = std::vector<int>(ids.begin(), ids.end())](Tape& tp, const Tensor& g) {
        Tensor& gt = tp.grad_buffer(table);
        for (std::size_t i = 0; i < ids.size(); ++i) {
          auto dst = gt.row_span(static_cast<std::size_t>(ids[i]));
          auto src = g.row_span(i);
          for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
        }
      },
      "embedding_lookup");
}

Var cross_entropy(Tape& t, Var logits, std::span<const int> targets) {
  const Tensor& lv = t.value(logits);
  if (lv.rows() != targets.size() || targets.empty()) {
    throw ShapeError("cross_entropy: shape mismatch " + shape_to_string(lv.shape()) +
                     " vs [" + std::to_string(targets.size()) + "]");
  }
  Tensor probs(lv.rows(), lv.cols());
  double loss = 0.0;
  for (std::size_t r = 0; r < lv.rows(); ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= lv.cols()) {
      throw ShapeError("cross_entropy: target " + std::to_string(targets[r]) +
                       " outside " + std::to_string(lv.cols()) + " classes");
    }
    auto row = lv.row_span(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    loss += log_z - row[static_cast<std::size_t>(targets[r])];
    for (std::size_t c = 0; c < lv.cols(); ++c) probs(r, c) = std::exp(row[c] - log_z);
  }
  const double inv_m = 1.0 / static_cast<double>(lv.rows());
  Tensor out(1, 1, loss * inv_m);
  return finish(
      t, std::move(out), t.requires_grad(logits),
      [logits, probs = std::move(probs), tg = std::vector<int>(targets.begin(), targets.end()),
       inv_m](Tape& tp, const Tensor& g) {
        Tensor& gl = tp.grad_buffer(logits);
        const double s = g[0] * inv_m;
        for (std::size_t r = 0; r < probs.rows(); ++r) {
          for (std::size_t c = 0; c < probs.cols(); ++c) {
            const double y = static_cast<std::size_t>(tg[r]) == c ? 1.0 : 0.0;
            gl(r, c) += s * (probs(r, c) - y);
          }
        }
      },
      "cross_entropy");
}

Var select_rows(Tape& t, Var a, std::span<const std::size_t> rows) {
  const Tensor& av = t.value(a);
  Tensor out(rows.size(), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) {
      throw ShapeError("select_rows: row " + std::to_string(rows[i]) + " outside " +
                       shape_to_string(av.shape()));
    }
    auto src = av.row_span(rows[i]);
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  return finish(
      t, std::move(out), t.requires_grad(a),
      [a, rows = std::vector<std::size_t>(rows.begin(), rows.end())](Tape& tp,
                                                                      const Tensor& g) {
        Tensor& ga = tp.grad_buffer(a);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          auto dst = ga.row_span(rows[i]);
          auto src = g.row_span(i);
          for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
        }
      },
      "select_rows");
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = t.value(parts[0]).rows();
  std::size_t total = 0;
  bool needs_grad = false;
  for (Var p : parts) {
    if (t.value(p).rows() != m) {
      throw ShapeError("concat_cols: shape mismatch " +
                       shape_to_string(t.value(parts[0]).shape()) + " vs " +
                       shape_to_string(t.value(p).shape()));
    }
    total += t.value(p).cols();
    needs_grad = needs_grad || t.requires_grad(p);
  }
  Tensor out(m, total);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& pv = t.value(p);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < pv.cols(); ++c) out(r, off + c) = pv(r, c);
    off += pv.cols();
  }
  return finish(
      t, std::move(out), needs_grad,
      [ps = std::vector<Var>(parts.begin(), parts.end())](Tape& tp, const Tensor& g) {
        std::size_t off = 0;
        for (Var p : ps) {
          const std::size_t w = tp.value(p).cols();
          if (tp.requires_grad(p)) {
            Tensor& gp = tp.grad_buffer(p);
            for (std::size_t r = 0; r < g.rows(); ++r)
              for (std::size_t c = 0; c < w; ++c) gp(r, c) += g(r, off + c);
          }
          off += w;
        }
      },
      "concat_cols");
}

Var dropout(Tape& t, Var a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  const Tensor& av = t.value(a);
  std::vector<double> mask(av.size());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = uniform01(rng) < rate ? 0.0 : keep_scale;
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return finish(
      t, std::move(out), t.requires_grad(a),
      [a, mask = std::move(mask)](Tape& tp, const Tensor& g) {
        Tensor& ga = tp.grad_buffer(a);
        for (std::size_t i = 0; i < mask.size(); ++i) ga[i] += g[i] * mask[i];
      },
      "dropout");
}

Var sum_squares(Tape& t, Var a) {
  Tensor out(1, 1, t.value(a).squared_norm());
  return finish(
      t, std::move(out), t.requires_grad(a),
      [a](Tape& tp, const Tensor& g) {
        tp.grad_buffer(a).add_scaled(tp.value(a), 2.0 * g[0]);
      },
      "sum_squares");
}

}  // namespace cfx
