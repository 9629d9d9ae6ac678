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

#ifndef KSENSE_SRC_KERNELS_HPP_
#define KSENSE_SRC_KERNELS_HPP_

// Row-major dense kernels. Loop orders keep the innermost loop contiguous.

#include <cstddef>

namespace ksense::kernels {

// c[m x n] += a[m x k] * b[k x n]
inline void gemm_acc(double* c, const double* a, const double* b,
                     std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ai[p];
      if (s == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
}

// c[m x k] += g[m x n] * b[k x n]^T
inline void gemm_acc_bt(double* c, const double* g, const double* b,
                        std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        s0 += gi[j] * bp[j];
        s1 += gi[j + 1] * bp[j + 1];
        s2 += gi[j + 2] * bp[j + 2];
        s3 += gi[j + 3] * bp[j + 3];
      }
      for (; j < n; ++j) s0 += gi[j] * bp[j];
      ci[p] += (s0 + s1) + (s2 + s3);
    }
  }
}

// c[k x n] += a[m x k]^T * g[m x n]
inline void gemm_acc_at(double* c, const double* a, const double* g,
                        std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ai[p];
      if (s == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += s * gi[j];
    }
  }
}

}  // namespace ksense::kernels

#endif  // KSENSE_SRC_KERNELS_HPP_
