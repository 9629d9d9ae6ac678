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

#include "ksense/gru.hpp"

#include <cmath>
#include <string>

#include "graph.hpp"
#include "kernels.hpp"

namespace ksense {

using detail::grad_sink;
using detail::make_result;
using detail::Node;
using detail::require;

namespace {

double sigmoid_scalar(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

enum Slot : std::size_t {
  kInputs = 0, kH0,
  kWz, kWr, kWn, kUz, kUr, kUn,
  kBz, kBr, kBn, kBhn,
};

}  // namespace

void GruParams::validate() const {
  const std::size_t din = W_z.rank() == 2 ? W_z.dim(0) : 0;
  const std::size_t dh = W_z.rank() == 2 ? W_z.dim(1) : 0;
  require(din > 0 && dh > 0, "gru: W_z must be a non-empty matrix");
  for (const Tensor* w : {&W_z, &W_r, &W_n}) {
    require(w->shape() == Shape{din, dh},
            "gru: input weights must all be " + shape_to_string({din, dh}) +
                ", got " + shape_to_string(w->shape()));
  }
  for (const Tensor* u : {&U_z, &U_r, &U_n}) {
    require(u->shape() == Shape{dh, dh},
            "gru: recurrent weights must be " + shape_to_string({dh, dh}) +
                ", got " + shape_to_string(u->shape()));
  }
  for (const Tensor* b : {&b_z, &b_r, &b_n, &b_hn}) {
    require(b->shape() == Shape{dh}, "gru: biases must be " +
                                         shape_to_string({dh}) + ", got " +
                                         shape_to_string(b->shape()));
  }
}

GruParams GruParams::zeros(std::size_t d_in, std::size_t d_hid,
                           bool requires_grad) {
  GruParams p;
  for (Tensor* w : {&p.W_z, &p.W_r, &p.W_n}) *w = Tensor::zeros({d_in, d_hid}, requires_grad);
  for (Tensor* u : {&p.U_z, &p.U_r, &p.U_n}) *u = Tensor::zeros({d_hid, d_hid}, requires_grad);
  for (Tensor* b : {&p.b_z, &p.b_r, &p.b_n, &p.b_hn}) *b = Tensor::zeros({d_hid}, requires_grad);
  return p;
}

Tensor gru_sequence(const Tensor& inputs, const GruParams& params,
                    const Tensor& h0) {
  params.validate();
  const std::size_t din = params.input_dim();
  const std::size_t dh = params.hidden_dim();
  require(inputs.rank() == 2 && inputs.dim(0) >= 1 && inputs.dim(1) == din,
          "gru: inputs must be [T x " + std::to_string(din) + "] with T >= 1, got " +
              shape_to_string(inputs.shape()));
  require(h0.shape() == Shape{dh}, "gru: h0 must be " + shape_to_string({dh}) +
                                       ", got " + shape_to_string(h0.shape()));
  const std::size_t T = inputs.dim(0);
  const double* x = inputs.values().data();

  // Input projections for all steps at once.
  std::vector<double> xz(T * dh, 0.0), xr(T * dh, 0.0), xn(T * dh, 0.0);
  kernels::gemm_acc(xz.data(), x, params.W_z.values().data(), T, din, dh);
  kernels::gemm_acc(xr.data(), x, params.W_r.values().data(), T, din, dh);
  kernels::gemm_acc(xn.data(), x, params.W_n.values().data(), T, din, dh);

  // Saved activations per step for the backward sweep.
  std::vector<double> Z(T * dh), R(T * dh), N(T * dh), HU(T * dh);
  std::vector<double> H(T * dh);
  std::vector<double> hz(dh), hr(dh), hn(dh);
  const auto bz = params.b_z.values();
  const auto br = params.b_r.values();
  const auto bn = params.b_n.values();
  const auto bhn = params.b_hn.values();
  for (std::size_t t = 0; t < T; ++t) {
    const double* hp = t == 0 ? h0.values().data() : H.data() + (t - 1) * dh;
    std::fill(hz.begin(), hz.end(), 0.0);
    std::fill(hr.begin(), hr.end(), 0.0);
    std::fill(hn.begin(), hn.end(), 0.0);
    kernels::gemm_acc(hz.data(), hp, params.U_z.values().data(), 1, dh, dh);
    kernels::gemm_acc(hr.data(), hp, params.U_r.values().data(), 1, dh, dh);
    kernels::gemm_acc(hn.data(), hp, params.U_n.values().data(), 1, dh, dh);
    for (std::size_t j = 0; j < dh; ++j) {
      const std::size_t o = t * dh + j;
      const double z = sigmoid_scalar(xz[o] + hz[j] + bz[j]);
      const double r = sigmoid_scalar(xr[o] + hr[j] + br[j]);
      const double hu = hn[j] + bhn[j];
      const double n = std::tanh(xn[o] + bn[j] + r * hu);
      Z[o] = z;
      R[o] = r;
      HU[o] = hu;
      N[o] = n;
      H[o] = (1.0 - z) * n + z * hp[j];
    }
  }

  std::vector<Tensor> parents = {inputs, h0,
                                 params.W_z, params.W_r, params.W_n,
                                 params.U_z, params.U_r, params.U_n,
                                 params.b_z, params.b_r, params.b_n, params.b_hn};
  return make_result(
      {T, dh}, H, parents,
      [T, din, dh, Z = std::move(Z), R = std::move(R), N = std::move(N),
       HU = std::move(HU)](Node& self) {
        auto& P = self.parents;
        const double* x = P[kInputs]->value.data();
        const double* h0v = P[kH0]->value.data();
        const double* H = self.value.data();
        auto* gx = grad_sink(*P[kInputs]);
        auto* gh0 = grad_sink(*P[kH0]);
        auto* gWz = grad_sink(*P[kWz]);
        auto* gWr = grad_sink(*P[kWr]);
        auto* gWn = grad_sink(*P[kWn]);
        auto* gUz = grad_sink(*P[kUz]);
        auto* gUr = grad_sink(*P[kUr]);
        auto* gUn = grad_sink(*P[kUn]);
        auto* gbz = grad_sink(*P[kBz]);
        auto* gbr = grad_sink(*P[kBr]);
        auto* gbn = grad_sink(*P[kBn]);
        auto* gbhn = grad_sink(*P[kBhn]);

        std::vector<double> dh_carry(dh, 0.0), dh_t(dh);
        std::vector<double> daz(dh), dar(dh), dan(dh), dhu(dh);
        for (std::size_t tt = T; tt-- > 0;) {
          const double* hp = tt == 0 ? h0v : H + (tt - 1) * dh;
          const double* xt = x + tt * din;
          for (std::size_t j = 0; j < dh; ++j) {
            dh_t[j] = self.grad[tt * dh + j] + dh_carry[j];
          }
          for (std::size_t j = 0; j < dh; ++j) {
            const std::size_t o = tt * dh + j;
            const double z = Z[o], r = R[o], n = N[o];
            const double dn = dh_t[j] * (1.0 - z);
            const double dz = dh_t[j] * (hp[j] - n);
            dan[j] = dn * (1.0 - n * n);
            dhu[j] = dan[j] * r;
            dar[j] = dan[j] * HU[o] * r * (1.0 - r);
            daz[j] = dz * z * (1.0 - z);
            dh_carry[j] = dh_t[j] * z;
          }
          // Recurrent path into h_{t-1}.
          kernels::gemm_acc_bt(dh_carry.data(), daz.data(), P[kUz]->value.data(), 1, dh, dh);
          kernels::gemm_acc_bt(dh_carry.data(), dar.data(), P[kUr]->value.data(), 1, dh, dh);
          kernels::gemm_acc_bt(dh_carry.data(), dhu.data(), P[kUn]->value.data(), 1, dh, dh);
          if (gUz) kernels::gemm_acc_at(gUz->data(), hp, daz.data(), 1, dh, dh);
          if (gUr) kernels::gemm_acc_at(gUr->data(), hp, dar.data(), 1, dh, dh);
          if (gUn) kernels::gemm_acc_at(gUn->data(), hp, dhu.data(), 1, dh, dh);
          if (gWz) kernels::gemm_acc_at(gWz->data(), xt, daz.data(), 1, din, dh);
          if (gWr) kernels::gemm_acc_at(gWr->data(), xt, dar.data(), 1, din, dh);
          if (gWn) kernels::gemm_acc_at(gWn->data(), xt, dan.data(), 1, din, dh);
          if (gx) {
            double* gxt = gx->data() + tt * din;
            kernels::gemm_acc_bt(gxt, daz.data(), P[kWz]->value.data(), 1, din, dh);
            kernels::gemm_acc_bt(gxt, dar.data(), P[kWr]->value.data(), 1, din, dh);
            kernels::gemm_acc_bt(gxt, dan.data(), P[kWn]->value.data(), 1, din, dh);
          }
          for (std::size_t j = 0; j < dh; ++j) {
            if (gbz) (*gbz)[j] += daz[j];
            if (gbr) (*gbr)[j] += dar[j];
            if (gbn) (*gbn)[j] += dan[j];
            if (gbhn) (*gbhn)[j] += dhu[j];
          }
        }
        if (gh0) {
          for (std::size_t j = 0; j < dh; ++j) (*gh0)[j] += dh_carry[j];
        }
      });
}

}  // namespace ksense
