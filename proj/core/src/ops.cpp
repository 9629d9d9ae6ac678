// Copyright 2026 The K-SENSE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ksense/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "graph.hpp"
#include "kernels.hpp"
#include "ksense/rng.hpp"

namespace ksense {

using detail::grad_sink;
using detail::make_result;
using detail::Node;
using detail::require;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(),
          std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
              " vs " + shape_to_string(b.shape()));
}

// Elementwise map with derivative expressed through input x and output y.
template <typename F, typename DF>
Tensor unary(const Tensor& x, F f, DF df) {
  const auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [df](Node& self) {
    Node& px = *self.parents[0];
    auto* gx = grad_sink(px);
    if (!gx) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      (*gx)[i] += self.grad[i] * df(px.value[i], self.value[i]);
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(b.rank() == 2 && (a.rank() == 1 || a.rank() == 2),
          "matmul: expected [k] or [m x k] times [k x n], got " +
              shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  const std::size_t m = a.rank() == 1 ? 1 : a.dim(0);
  const std::size_t k = a.rank() == 1 ? a.dim(0) : a.dim(1);
  const std::size_t n = b.dim(1);
  require(k == b.dim(0), "matmul: inner dimensions differ, " +
                             shape_to_string(a.shape()) + " x " +
                             shape_to_string(b.shape()));
  std::vector<double> out(m * n, 0.0);
  kernels::gemm_acc(out.data(), a.values().data(), b.values().data(), m, k, n);
  Shape shape = a.rank() == 1 ? Shape{n} : Shape{m, n};
  return make_result(std::move(shape), std::move(out), {a, b},
                     [m, k, n](Node& self) {
                       Node& pa = *self.parents[0];
                       Node& pb = *self.parents[1];
                       if (auto* ga = grad_sink(pa)) {
                         kernels::gemm_acc_bt(ga->data(), self.grad.data(),
                                              pb.value.data(), m, k, n);
                       }
                       if (auto* gb = grad_sink(pb)) {
                         kernels::gemm_acc_at(gb->data(), pa.value.data(),
                                              self.grad.data(), m, k, n);
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (int p = 0; p < 2; ++p) {
      if (auto* g = grad_sink(*self.parents[p])) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* g = grad_sink(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_sink(*self.parents[1])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (auto* g = grad_sink(pa)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        (*g)[i] += self.grad[i] * pb.value[i];
      }
    }
    if (auto* g = grad_sink(pb)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        (*g)[i] += self.grad[i] * pa.value[i];
      }
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require(bias.rank() == 1 && (x.rank() == 1 || x.rank() == 2) &&
              x.shape().back() == bias.dim(0),
          "add_bias: cannot add " + shape_to_string(bias.shape()) + " to " +
              shape_to_string(x.shape()));
  const std::size_t n = bias.dim(0);
  std::vector<double> out(x.values().begin(), x.values().end());
  const auto bv = bias.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % n];
  return make_result(x.shape(), std::move(out), {x, bias}, [n](Node& self) {
    if (auto* g = grad_sink(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_sink(*self.parents[1])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i % n] += self.grad[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return factor * v; },
      [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  require(a.rank() == 1 && b.rank() == 1,
          "concat: expected rank-1 operands, got " + shape_to_string(a.shape()) +
              " and " + shape_to_string(b.shape()));
  const std::size_t na = a.dim(0);
  std::vector<double> out(a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t n = out.size();
  return make_result({n}, std::move(out), {a, b}, [na](Node& self) {
    if (auto* g = grad_sink(*self.parents[0])) {
      for (std::size_t i = 0; i < na; ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_sink(*self.parents[1])) {
      for (std::size_t i = na; i < self.grad.size(); ++i) (*g)[i - na] += self.grad[i];
    }
  });
}

Tensor slice(const Tensor& x, std::size_t begin, std::size_t length) {
  require(x.rank() == 1 && begin + length <= x.dim(0),
          "slice: [" + std::to_string(begin) + ", +" + std::to_string(length) +
              ") out of range for " + shape_to_string(x.shape()));
  std::vector<double> out(x.values().begin() + static_cast<std::ptrdiff_t>(begin),
                          x.values().begin() + static_cast<std::ptrdiff_t>(begin + length));
  return make_result({length}, std::move(out), {x}, [begin](Node& self) {
    if (auto* g = grad_sink(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[begin + i] += self.grad[i];
    }
  });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  require(!rows.empty(), "stack_rows: no rows");
  const std::size_t n = rows.front().numel();
  std::vector<double> out;
  out.reserve(rows.size() * n);
  for (const auto& r : rows) {
    require(r.rank() == 1 && r.dim(0) == n,
            "stack_rows: row of shape " + shape_to_string(r.shape()) +
                ", expected [" + std::to_string(n) + "]");
    out.insert(out.end(), r.values().begin(), r.values().end());
  }
  return make_result({rows.size(), n}, std::move(out), rows, [n](Node& self) {
    for (std::size_t r = 0; r < self.parents.size(); ++r) {
      if (auto* g = grad_sink(*self.parents[r])) {
        for (std::size_t j = 0; j < n; ++j) (*g)[j] += self.grad[r * n + j];
      }
    }
  });
}

Tensor row(const Tensor& x, std::size_t index) {
  require(x.rank() == 2 && index < x.dim(0),
          "row: index " + std::to_string(index) + " out of range for " +
              shape_to_string(x.shape()));
  const std::size_t n = x.dim(1);
  const auto base = x.values().begin() + static_cast<std::ptrdiff_t>(index * n);
  std::vector<double> out(base, base + static_cast<std::ptrdiff_t>(n));
  return make_result({n}, std::move(out), {x}, [index, n](Node& self) {
    if (auto* g = grad_sink(*self.parents[0])) {
      for (std::size_t j = 0; j < n; ++j) (*g)[index * n + j] += self.grad[j];
    }
  });
}

Tensor mean_rows(const Tensor& x) {
  require(x.rank() == 2 && x.dim(0) > 0,
          "mean_rows: expected non-empty rank-2 tensor, got " +
              shape_to_string(x.shape()));
  const std::size_t m = x.dim(0);
  const std::size_t n = x.dim(1);
  std::vector<double> out(n, 0.0);
  const auto v = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] += v[i * n + j];
  }
  const double inv = 1.0 / static_cast<double>(m);
  for (double& o : out) o *= inv;
  return make_result({n}, std::move(out), {x}, [m, n, inv](Node& self) {
    if (auto* g = grad_sink(*self.parents[0])) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += inv * self.grad[j];
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(shape_numel(shape) == x.numel(),
          "reshape: cannot view " + shape_to_string(x.shape()) + " as " +
              shape_to_string(shape));
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    if (auto* g = grad_sink(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result({}, {s}, {x}, [](Node& self) {
    if (auto* g = grad_sink(*self.parents[0])) {
      for (double& gi : *g) gi += self.grad[0];
    }
  });
}

DropoutResult dropout(const Tensor& x, double p, std::uint64_t mask_seed,
                      Mode mode) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout: probability must lie in [0, 1), got " +
                      std::to_string(p));
  }
  DropoutResult result;
  result.mask.assign(x.numel(), 1);
  if (mode == Mode::kEval) {
    result.output = x;
    return result;
  }
  Xoshiro256 rng(mask_seed);
  for (auto& m : result.mask) m = rng.uniform() >= p ? 1 : 0;
  const double keep_scale = 1.0 / (1.0 - p);
  const auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = result.mask[i] ? in[i] * keep_scale : 0.0;
  }
  result.output = make_result(
      x.shape(), std::move(out), {x},
      [mask = result.mask, keep_scale](Node& self) {
        if (auto* g = grad_sink(*self.parents[0])) {
          for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (mask[i]) (*g)[i] += keep_scale * self.grad[i];
          }
        }
      });
  return result;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double mx = *std::max_element(out.begin(), out.end());
  double z = 0.0;
  for (double& v : out) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : out) v /= z;
  return out;
}

AttentionResult scaled_softmax_attention(const Tensor& query,
                                         const Tensor& keys,
                                         std::size_t scale_dim) {
  require(query.rank() == 1 && keys.rank() == 2,
          "attention: expected query [d] and keys [r x d], got " +
              shape_to_string(query.shape()) + " and " +
              shape_to_string(keys.shape()));
  if (keys.dim(0) == 0) throw ShapeError("attention: empty knowledge (r = 0)");
  require(query.dim(0) == keys.dim(1),
          "attention: query " + shape_to_string(query.shape()) +
              " does not match keys " + shape_to_string(keys.shape()));
  if (scale_dim == 0) throw ConfigError("attention: scale_dim must be positive");

  const std::size_t r = keys.dim(0);
  const std::size_t d = keys.dim(1);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(scale_dim));
  const auto q = query.values();
  const auto k = keys.values();
  std::vector<double> logits(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += q[j] * k[i * d + j];
    logits[i] = s * inv_sqrt;
  }
  std::vector<double> w = softmax(logits);

  // Gradients of the weights flow back through the logits into query/keys.
  AttentionResult out;
  out.weights = make_result({r}, w, {query, keys},
                            [r, d, inv_sqrt](Node& self) {
    Node& pq = *self.parents[0];
    Node& pk = *self.parents[1];
    const auto& a = self.value;
    double dot_ga = 0.0;
    for (std::size_t i = 0; i < r; ++i) dot_ga += self.grad[i] * a[i];
    auto* gq = grad_sink(pq);
    auto* gk = grad_sink(pk);
    for (std::size_t i = 0; i < r; ++i) {
      const double dlogit = a[i] * (self.grad[i] - dot_ga) * inv_sqrt;
      if (dlogit == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) {
        if (gq) (*gq)[j] += dlogit * pk.value[i * d + j];
        if (gk) (*gk)[i * d + j] += dlogit * pq.value[j];
      }
    }
  });

  std::vector<double> ctx(d, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < d; ++j) ctx[j] += w[i] * k[i * d + j];
  }
  out.context = make_result({d}, std::move(ctx), {out.weights, keys},
                            [r, d](Node& self) {
    Node& pw = *self.parents[0];
    Node& pk = *self.parents[1];
    auto* gw = grad_sink(pw);
    auto* gk = grad_sink(pk);
    for (std::size_t i = 0; i < r; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        s += self.grad[j] * pk.value[i * d + j];
        if (gk) (*gk)[i * d + j] += pw.value[i] * self.grad[j];
      }
      if (gw) (*gw)[i] += s;
    }
  });
  return out;
}

}  // namespace ksense
