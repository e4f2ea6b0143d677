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

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

// Data-parallel inner loops used across the pipeline. Each kernel has a
// portable scalar reference implementation and, where the CPU supports it,
// an AVX2 variant. The active table is chosen once at startup from CPUID;
// setting MLENS_ISA=scalar in the environment forces the reference path.
namespace mlens::simd {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa) noexcept;

/// Number of 64-bit words in a 512-bit binary descriptor.
inline constexpr std::size_t kDescriptorWords = 8;
inline constexpr std::size_t kDescriptorBits = 512;

struct LkAccum {
  float bx = 0.f;
  float by = 0.f;
  float abs_err = 0.f;
};

struct KernelTable {
  Isa isa;

  /// Bit distance between two 512-bit strings.
  std::uint32_t (*hamming512)(const std::uint64_t* a, const std::uint64_t* b);

  /// Distances from one query to n contiguous 512-bit references.
  void (*hamming512_many)(const std::uint64_t* query, const std::uint64_t* refs, std::size_t n,
                          std::uint32_t* out);

  float (*dot_f32)(const float* a, const float* b, std::size_t n);

  /// y += a * x
  void (*axpy_f32)(float a, const float* x, float* y, std::size_t n);

  /// Sum of w[d] over the set bits d of a 512-bit string.
  double (*masked_sum512)(const std::uint64_t* bits, const double* w);

  /// acc[d] += h for every set bit d of a 512-bit string.
  void (*masked_add512)(double* acc, const std::uint64_t* bits, double h);

  /// One row of a 1-D convolution: dst[i] = sum_k kernel[k] * src[i + k],
  /// k in [0, taps). src must hold n + taps - 1 readable values.
  void (*convolve_row_f32)(const float* src, const float* kernel, std::size_t taps, float* dst,
                           std::size_t n);

  /// Lucas-Kanade window row: residual r = tmpl - bilinear(J) with the four
  /// weights applied to rows j0/j1 at columns c and c+1; accumulates r*ix,
  /// r*iy and |r|.
  void (*lk_row)(const float* j0, const float* j1, const float* weights4, const float* tmpl,
                 const float* ix, const float* iy, std::size_t n, LkAccum* acc);
};

const KernelTable& scalar_kernels() noexcept;

/// nullptr when the AVX2 variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_kernels() noexcept;

/// The table selected for this process.
const KernelTable& kernels() noexcept;

}  // namespace mlens::simd
