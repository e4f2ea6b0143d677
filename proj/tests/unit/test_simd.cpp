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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "mlens/common/random.hpp"
#include "mlens/simd/kernels.hpp"

using namespace mlens;
using namespace mlens::simd;

namespace {

std::vector<std::uint64_t> random_bits(std::size_t words, Rng& rng) {
  std::vector<std::uint64_t> v(words);
  for (auto& w : v) w = rng.next();
  return v;
}

std::vector<float> random_floats(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

}  // namespace

TEST_CASE("active table is one of the compiled variants") {
  const auto& k = kernels();
  CHECK((k.isa == Isa::Scalar || k.isa == Isa::Avx2));
  MESSAGE("active ISA: " << to_string(k.isa));
}

TEST_CASE("scalar hamming matches bit-by-bit count") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    auto a = random_bits(8, rng), b = random_bits(8, rng);
    std::uint32_t expect = 0;
    for (int bit = 0; bit < 512; ++bit) expect += ((a[bit / 64] >> (bit % 64)) & 1) != ((b[bit / 64] >> (bit % 64)) & 1);
    CHECK(scalar_kernels().hamming512(a.data(), b.data()) == expect);
  }
}

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  const KernelTable* v = avx2_kernels();
  if (v == nullptr) {
    MESSAGE("AVX2 unavailable; equivalence skipped");
    return;
  }
  const KernelTable& s = scalar_kernels();
  Rng rng(7);

  SUBCASE("hamming512 and batch form are exact") {
    auto q = random_bits(8, rng);
    auto refs = random_bits(8 * 37, rng);
    std::vector<std::uint32_t> ds(37), dv(37);
    s.hamming512_many(q.data(), refs.data(), 37, ds.data());
    v->hamming512_many(q.data(), refs.data(), 37, dv.data());
    CHECK(ds == dv);
    CHECK(s.hamming512(q.data(), refs.data()) == v->hamming512(q.data(), refs.data()));
  }

  SUBCASE("dot and axpy within float tolerance, odd lengths included") {
    for (std::size_t n : {1u, 7u, 8u, 15u, 16u, 33u, 4104u}) {
      auto a = random_floats(n, rng), b = random_floats(n, rng);
      const float ds = s.dot_f32(a.data(), b.data(), n);
      const float dv = v->dot_f32(a.data(), b.data(), n);
      CHECK(std::fabs(ds - dv) <= 1e-4f * (1.0f + std::sqrt(static_cast<float>(n))));
      auto ys = b, yv = b;
      s.axpy_f32(0.37f, a.data(), ys.data(), n);
      v->axpy_f32(0.37f, a.data(), yv.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(ys[i] - yv[i]) <= 1e-6f);
    }
  }

  SUBCASE("masked sum and masked add") {
    std::vector<double> w(512);
    for (auto& x : w) x = rng.uniform(-3.0, 3.0);
    for (int t = 0; t < 20; ++t) {
      auto bits = random_bits(8, rng);
      if (t == 0) bits.assign(8, 0);
      if (t == 1) bits.assign(8, ~0ULL);
      CHECK(s.masked_sum512(bits.data(), w.data()) == doctest::Approx(v->masked_sum512(bits.data(), w.data())).epsilon(1e-12));
      std::vector<double> as(512, 0.5), av(512, 0.5);
      s.masked_add512(as.data(), bits.data(), 0.25);
      v->masked_add512(av.data(), bits.data(), 0.25);
      CHECK(as == av);
    }
  }

  SUBCASE("row convolution") {
    auto k = random_floats(11, rng);
    for (std::size_t n : {3u, 8u, 29u, 640u}) {
      auto src = random_floats(n + k.size() - 1, rng);
      std::vector<float> os(n), ov(n);
      s.convolve_row_f32(src.data(), k.data(), k.size(), os.data(), n);
      v->convolve_row_f32(src.data(), k.data(), k.size(), ov.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(os[i] - ov[i]) <= 1e-5f);
    }
  }

  SUBCASE("Lucas-Kanade window rows") {
    for (std::size_t n : {5u, 21u, 31u}) {
      auto j0 = random_floats(n + 1, rng), j1 = random_floats(n + 1, rng);
      auto t = random_floats(n, rng), ix = random_floats(n, rng), iy = random_floats(n, rng);
      const float w[4] = {0.1f, 0.2f, 0.3f, 0.4f};
      LkAccum as, av;
      s.lk_row(j0.data(), j1.data(), w, t.data(), ix.data(), iy.data(), n, &as);
      v->lk_row(j0.data(), j1.data(), w, t.data(), ix.data(), iy.data(), n, &av);
      CHECK(as.bx == doctest::Approx(av.bx).epsilon(1e-4));
      CHECK(as.by == doctest::Approx(av.by).epsilon(1e-4));
      CHECK(as.abs_err == doctest::Approx(av.abs_err).epsilon(1e-4));
    }
  }
}
