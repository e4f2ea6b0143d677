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

#include <immintrin.h>

#include <bit>
#include <cmath>

#include "kernels_impl.hpp"

namespace mlens::simd::avx2 {
namespace {

inline __m256i popcount_bytes(__m256i v) {
  const __m256i lookup = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
                                          0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
  const __m256i low_mask = _mm256_set1_epi8(0x0f);
  const __m256i lo = _mm256_and_si256(v, low_mask);
  const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(v, 4), low_mask);
  return _mm256_add_epi8(_mm256_shuffle_epi8(lookup, lo), _mm256_shuffle_epi8(lookup, hi));
}

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

std::uint32_t hamming512(const std::uint64_t* a, const std::uint64_t* b) {
  const __m256i x0 = _mm256_xor_si256(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(a)),
                                      _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b)));
  const __m256i x1 = _mm256_xor_si256(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + 4)),
                                      _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + 4)));
  const __m256i counts = _mm256_add_epi8(popcount_bytes(x0), popcount_bytes(x1));
  const __m256i sums = _mm256_sad_epu8(counts, _mm256_setzero_si256());
  return static_cast<std::uint32_t>(_mm256_extract_epi64(sums, 0) + _mm256_extract_epi64(sums, 1) +
                                    _mm256_extract_epi64(sums, 2) + _mm256_extract_epi64(sums, 3));
}

void hamming512_many(const std::uint64_t* query, const std::uint64_t* refs, std::size_t n, std::uint32_t* out) {
  const __m256i q0 = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(query));
  const __m256i q1 = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(query + 4));
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t* r = refs + i * kDescriptorWords;
    const __m256i x0 = _mm256_xor_si256(q0, _mm256_loadu_si256(reinterpret_cast<const __m256i*>(r)));
    const __m256i x1 = _mm256_xor_si256(q1, _mm256_loadu_si256(reinterpret_cast<const __m256i*>(r + 4)));
    const __m256i counts = _mm256_add_epi8(popcount_bytes(x0), popcount_bytes(x1));
    const __m256i sums = _mm256_sad_epu8(counts, _mm256_setzero_si256());
    out[i] = static_cast<std::uint32_t>(_mm256_extract_epi64(sums, 0) + _mm256_extract_epi64(sums, 1) +
                                        _mm256_extract_epi64(sums, 2) + _mm256_extract_epi64(sums, 3));
  }
}

float dot_f32(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  float s = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_f32(float a, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

// Lane j of the selector tests bit (4*step + j) of the broadcast word.
inline __m256d bit_mask(__m256i word, __m256i selector) {
  const __m256i hit = _mm256_cmpeq_epi64(_mm256_and_si256(word, selector), selector);
  return _mm256_castsi256_pd(hit);
}

double masked_sum512(const std::uint64_t* bits, const double* w) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  for (std::size_t word = 0; word < kDescriptorWords; ++word) {
    const std::uint64_t v = bits[word];
    if (v == 0) continue;
    const __m256i bw = _mm256_set1_epi64x(static_cast<long long>(v));
    __m256i sel0 = _mm256_setr_epi64x(1, 2, 4, 8);
    __m256i sel1 = _mm256_setr_epi64x(16, 32, 64, 128);
    const double* wp = w + word * 64;
    for (int step = 0; step < 8; ++step) {
      acc0 = _mm256_add_pd(acc0, _mm256_and_pd(bit_mask(bw, sel0), _mm256_loadu_pd(wp + 8 * step)));
      acc1 = _mm256_add_pd(acc1, _mm256_and_pd(bit_mask(bw, sel1), _mm256_loadu_pd(wp + 8 * step + 4)));
      sel0 = _mm256_slli_epi64(sel0, 8);
      sel1 = _mm256_slli_epi64(sel1, 8);
    }
  }
  return hsum(_mm256_add_pd(acc0, acc1));
}

void masked_add512(double* acc, const std::uint64_t* bits, double h) {
  const __m256d vh = _mm256_set1_pd(h);
  for (std::size_t word = 0; word < kDescriptorWords; ++word) {
    const std::uint64_t v = bits[word];
    if (v == 0) continue;
    const __m256i bw = _mm256_set1_epi64x(static_cast<long long>(v));
    __m256i sel = _mm256_setr_epi64x(1, 2, 4, 8);
    double* ap = acc + word * 64;
    for (int step = 0; step < 16; ++step) {
      const __m256d add = _mm256_and_pd(bit_mask(bw, sel), vh);
      _mm256_storeu_pd(ap + 4 * step, _mm256_add_pd(_mm256_loadu_pd(ap + 4 * step), add));
      sel = _mm256_slli_epi64(sel, 4);
    }
  }
}

void convolve_row_f32(const float* src, const float* kernel, std::size_t taps, float* dst, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 s = _mm256_setzero_ps();
    for (std::size_t k = 0; k < taps; ++k) {
      s = _mm256_fmadd_ps(_mm256_set1_ps(kernel[k]), _mm256_loadu_ps(src + i + k), s);
    }
    _mm256_storeu_ps(dst + i, s);
  }
  for (; i < n; ++i) {
    float s = 0.f;
    for (std::size_t k = 0; k < taps; ++k) s += kernel[k] * src[i + k];
    dst[i] = s;
  }
}

void lk_row(const float* j0, const float* j1, const float* w, const float* tmpl, const float* ix, const float* iy,
            std::size_t n, LkAccum* acc) {
  const __m256 w00 = _mm256_set1_ps(w[0]);
  const __m256 w01 = _mm256_set1_ps(w[1]);
  const __m256 w10 = _mm256_set1_ps(w[2]);
  const __m256 w11 = _mm256_set1_ps(w[3]);
  const __m256 sign = _mm256_set1_ps(-0.0f);
  __m256 bx = _mm256_setzero_ps();
  __m256 by = _mm256_setzero_ps();
  __m256 e = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 j = _mm256_mul_ps(w00, _mm256_loadu_ps(j0 + i));
    j = _mm256_fmadd_ps(w01, _mm256_loadu_ps(j0 + i + 1), j);
    j = _mm256_fmadd_ps(w10, _mm256_loadu_ps(j1 + i), j);
    j = _mm256_fmadd_ps(w11, _mm256_loadu_ps(j1 + i + 1), j);
    const __m256 r = _mm256_sub_ps(_mm256_loadu_ps(tmpl + i), j);
    bx = _mm256_fmadd_ps(r, _mm256_loadu_ps(ix + i), bx);
    by = _mm256_fmadd_ps(r, _mm256_loadu_ps(iy + i), by);
    e = _mm256_add_ps(e, _mm256_andnot_ps(sign, r));
  }
  float sbx = hsum(bx), sby = hsum(by), se = hsum(e);
  for (; i < n; ++i) {
    const float j = w[0] * j0[i] + w[1] * j0[i + 1] + w[2] * j1[i] + w[3] * j1[i + 1];
    const float r = tmpl[i] - j;
    sbx += r * ix[i];
    sby += r * iy[i];
    se += std::fabs(r);
  }
  acc->bx += sbx;
  acc->by += sby;
  acc->abs_err += se;
}

}  // namespace

const KernelTable& table() noexcept {
  static const KernelTable t{
      Isa::Avx2, hamming512,    hamming512_many,  dot_f32, axpy_f32,
      masked_sum512, masked_add512, convolve_row_f32, lk_row,
  };
  return t;
}

}  // namespace mlens::simd::avx2
