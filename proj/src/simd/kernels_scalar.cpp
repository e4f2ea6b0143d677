// Copyright 2026 The mlens Authors
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

#include <bit>
#include <cmath>

#include "kernels_impl.hpp"

namespace mlens::simd::scalar {

std::uint32_t hamming512(const std::uint64_t* a, const std::uint64_t* b) {
  std::uint32_t d = 0;
  for (std::size_t w = 0; w < kDescriptorWords; ++w) d += static_cast<std::uint32_t>(std::popcount(a[w] ^ b[w]));
  return d;
}

void hamming512_many(const std::uint64_t* query, const std::uint64_t* refs, std::size_t n, std::uint32_t* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = hamming512(query, refs + i * kDescriptorWords);
}

float dot_f32(const float* a, const float* b, std::size_t n) {
  float s = 0.f;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_f32(float a, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double masked_sum512(const std::uint64_t* bits, const double* w) {
  double s = 0.0;
  for (std::size_t word = 0; word < kDescriptorWords; ++word) {
    std::uint64_t v = bits[word];
    while (v) {
      const int b = std::countr_zero(v);
      s += w[word * 64 + static_cast<std::size_t>(b)];
      v &= v - 1;
    }
  }
  return s;
}

void masked_add512(double* acc, const std::uint64_t* bits, double h) {
  for (std::size_t word = 0; word < kDescriptorWords; ++word) {
    std::uint64_t v = bits[word];
    while (v) {
      const int b = std::countr_zero(v);
      acc[word * 64 + static_cast<std::size_t>(b)] += h;
      v &= v - 1;
    }
  }
}

void convolve_row_f32(const float* src, const float* kernel, std::size_t taps, float* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    float s = 0.f;
    for (std::size_t k = 0; k < taps; ++k) s += kernel[k] * src[i + k];
    dst[i] = s;
  }
}

void lk_row(const float* j0, const float* j1, const float* w, const float* tmpl, const float* ix, const float* iy,
            std::size_t n, LkAccum* acc) {
  float bx = 0.f, by = 0.f, e = 0.f;
  for (std::size_t i = 0; i < n; ++i) {
    const float j = w[0] * j0[i] + w[1] * j0[i + 1] + w[2] * j1[i] + w[3] * j1[i + 1];
    const float r = tmpl[i] - j;
    bx += r * ix[i];
    by += r * iy[i];
    e += std::fabs(r);
  }
  acc->bx += bx;
  acc->by += by;
  acc->abs_err += e;
}

}  // namespace mlens::simd::scalar

namespace mlens::simd {

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{
      Isa::Scalar,           scalar::hamming512,    scalar::hamming512_many,  scalar::dot_f32,
      scalar::axpy_f32,      scalar::masked_sum512, scalar::masked_add512,    scalar::convolve_row_f32,
      scalar::lk_row,
  };
  return table;
}

}  // namespace mlens::simd
