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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "mlens/harness/scene.hpp"
#include "mlens/index/reference_index.hpp"
#include "support.hpp"

using namespace mlens;
using namespace mlens::retrieval;

namespace {

constexpr std::size_t W = 8;

std::vector<std::uint64_t> sample_mixture(const std::vector<std::vector<double>>& means, const std::vector<double>& w,
                                          std::size_t n, std::uint64_t seed, std::vector<std::size_t>* labels = nullptr) {
  Rng rng(seed);
  std::vector<std::uint64_t> out(n * W, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    std::size_t k = 0;
    while (k + 1 < w.size() && u >= w[k]) u -= w[k++];
    if (labels) labels->push_back(k);
    for (std::size_t d = 0; d < 512; ++d)
      if (rng.bernoulli(means[k][d])) out[i * W + d / 64] |= std::uint64_t{1} << (d % 64);
  }
  return out;
}

std::vector<feat::Descriptor512> unpack(const std::vector<std::uint64_t>& packed) {
  std::vector<feat::Descriptor512> out(packed.size() / W);
  for (std::size_t i = 0; i < out.size(); ++i) std::copy_n(packed.begin() + i * W, W, out[i].bits.begin());
  return out;
}

std::vector<feat::Descriptor512> poster_descriptors(std::uint64_t seed) {
  return describe_image(canonical_reference(harness::make_sized_poster(seed))).descriptors;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

std::vector<float> unit_gaussian(std::size_t dim, Rng& rng) {
  std::vector<float> v(dim);
  double n = 0;
  for (auto& x : v) {
    x = static_cast<float>(rng.normal());
    n += double(x) * x;
  }
  for (auto& x : v) x = static_cast<float>(x / std::sqrt(n));
  return v;
}

std::vector<float> perturbed(const std::vector<float>& c, double rel_noise, Rng& rng) {
  const auto noise = unit_gaussian(c.size(), rng);
  std::vector<float> v(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) v[i] = static_cast<float>(c[i] + rel_noise * noise[i]);
  return v;
}

}  // namespace

TEST_CASE("train_bmm rejects small inputs") {
  std::vector<std::uint64_t> few(79 * W, 0);
  CHECK_THROWS_AS(train_bmm(few, 8), Error);
  CHECK_THROWS_AS(train_bmm(std::vector<std::uint64_t>(7), 1), Error);
}

TEST_CASE("K=1 lands on the empirical bit frequencies") {
  std::vector<double> mu(512);
  Rng rng(3);
  for (auto& m : mu) m = rng.uniform(0.2, 0.8);
  const auto data = sample_mixture({mu}, {1.0}, 3000, 9);
  const auto fit = train_bmm(data, 1);
  REQUIRE(fit.params.weights.size() == 1);
  CHECK(fit.params.weights[0] == 1.0);
  for (std::size_t d = 0; d < 512; ++d) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < 3000; ++i) count += (data[i * W + d / 64] >> (d % 64)) & 1u;
    CHECK(fit.params.mean(0, d) == static_cast<double>(count) / 3000.0);
  }
}

TEST_CASE("EM recovers a separated two-component mixture") {
  Rng rng(5);
  std::vector<double> a(512), b(512);
  for (std::size_t d = 0; d < 512; ++d) {
    a[d] = rng.uniform(0.05, 0.35);
    b[d] = rng.uniform(0.65, 0.95);
    if (d % 2) std::swap(a[d], b[d]);
  }
  const auto data = sample_mixture({a, b}, {0.4, 0.6}, 10000, 11);
  EmConfig cfg;
  cfg.seed = 2;
  const auto fit = train_bmm(data, 2, cfg);
  const auto& p = fit.params;
  // Match components by the first bit.
  const std::size_t ka = std::fabs(p.mean(0, 0) - a[0]) < std::fabs(p.mean(1, 0) - a[0]) ? 0 : 1;
  double worst = 0;
  for (std::size_t d = 0; d < 512; ++d) {
    worst = std::max(worst, std::fabs(p.mean(ka, d) - a[d]));
    worst = std::max(worst, std::fabs(p.mean(1 - ka, d) - b[d]));
  }
  CHECK(worst < 0.05);
  CHECK(p.weights[ka] == doctest::Approx(0.4).epsilon(0.05));
}

TEST_CASE("EM likelihood never decreases and parameters stay valid") {
  const auto real = feat::pack_bits(poster_descriptors(101));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EmConfig cfg;
    cfg.seed = seed;
    cfg.tol = 0.0;
    cfg.max_iters = 25;
    bool valid = true;
    cfg.on_iteration = [&](int, const BmmParams& p, double) {
      double sum = 0;
      for (double w : p.weights) {
        sum += w;
        valid = valid && w > 0 && w <= 1;
      }
      valid = valid && std::fabs(sum - 1.0) < 1e-9;
      for (double m : p.means) valid = valid && m >= cfg.eps && m <= 1 - cfg.eps;
    };
    const auto fit = train_bmm(real, 4, cfg);
    CHECK(valid);
    CHECK(fit.log_likelihood.size() == static_cast<std::size_t>(fit.iterations) + 1);
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
      CHECK(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-9);
    CHECK(fit.log_likelihood.back() == doctest::Approx(mean_log_likelihood(fit.params, real)));
  }
}

TEST_CASE("fisher vectors") {
  const auto d1 = poster_descriptors(201);
  const auto d2 = poster_descriptors(202);
  std::vector<feat::Descriptor512> both(d1);
  both.insert(both.end(), d2.begin(), d2.end());
  const auto bmm = train_bmm(both, 8).params;

  CHECK_THROWS_AS(encode_fv(std::vector<feat::Descriptor512>{}, bmm), Error);
  const auto a = encode_fv(d1, bmm);
  CHECK(a.size() == 4104);
  CHECK(fv_dimension(bmm) == 4104);
  double n = 0;
  for (float v : a) n += double(v) * v;
  CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));

  CHECK(encode_fv(d1, bmm) == a);
  auto shuffled = d1;
  Rng rng(1);
  for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
  CHECK(encode_fv(shuffled, bmm) == a);

  const auto b = encode_fv(d2, bmm);
  CHECK(cosine(a, b) < 0.5);

  // Brute-force oracle for the unnormalised layout on a tiny model.
  BmmParams tiny;
  tiny.K = 2;
  tiny.weights = {0.3, 0.7};
  tiny.means.resize(2 * 512);
  for (std::size_t d = 0; d < 512; ++d) {
    tiny.means[d] = 0.2 + 0.6 * ((d * 7) % 11) / 10.0;
    tiny.means[512 + d] = 0.5;
  }
  const std::vector<feat::Descriptor512> few(d1.begin(), d1.begin() + 5);
  std::vector<double> expect(2 * 513, 0.0);
  for (const auto& x : few) {
    double lp[2];
    for (std::size_t k = 0; k < 2; ++k) {
      lp[k] = std::log(tiny.weights[k]);
      for (std::size_t d = 0; d < 512; ++d) lp[k] += std::log(x.bit(d) ? tiny.mean(k, d) : 1 - tiny.mean(k, d));
    }
    const double m = std::max(lp[0], lp[1]);
    const double z = std::exp(lp[0] - m) + std::exp(lp[1] - m);
    for (std::size_t k = 0; k < 2; ++k) {
      const double g = std::exp(lp[k] - m) / z;
      expect[k] += (g - tiny.weights[k]) / (5 * std::sqrt(tiny.weights[k]));
      for (std::size_t d = 0; d < 512; ++d) {
        const double mu = tiny.mean(k, d);
        expect[2 + k * 512 + d] += g * (x.bit(d) - mu) / std::sqrt(mu * (1 - mu)) / (5 * std::sqrt(tiny.weights[k]));
      }
    }
  }
  double norm = 0;
  for (double& v : expect) {
    v = std::copysign(std::sqrt(std::fabs(v)), v);
    norm += v * v;
  }
  const auto got = encode_fv(few, tiny);
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(got[i] == doctest::Approx(expect[i] / std::sqrt(norm)).epsilon(1e-5));
}

TEST_CASE("lsh basics") {
  Rng rng(8);
  const auto v = unit_gaussian(64, rng);
  const LshIndex one({v}, {42});
  const auto r = one.query(v, 5);
  REQUIRE(r.size() == 1);
  CHECK(r[0].ref_id == 42);
  CHECK(r[0].distance == doctest::Approx(0.0).epsilon(1e-6));

  CHECK_THROWS_AS(LshIndex({v, std::vector<float>(63)}, {1, 2}), Error);
  CHECK_THROWS_AS(one.query(std::vector<float>(63), 1), Error);

  std::vector<std::vector<float>> vs;
  std::vector<std::uint32_t> ids;
  for (std::uint32_t i = 0; i < 100; ++i) {
    vs.push_back(unit_gaussian(64, rng));
    ids.push_back(1000 - i);
  }
  // Duplicates under different ids tie; the lower id wins.
  vs.push_back(vs[10]);
  ids.push_back(5);
  const LshIndex idx(vs, ids);
  const auto q = idx.query(vs[10], 5);
  REQUIRE(q.size() == 5);
  CHECK(q[0].ref_id == 5);
  CHECK(q[1].ref_id == 990);
  for (std::size_t i = 1; i < q.size(); ++i) CHECK(q[i - 1].distance <= q[i].distance);

  // A query orthogonal to everything still gets k answers via the scan.
  std::vector<float> ortho(64, 0.0f);
  const LshIndex axis({std::vector<float>{1, 0, 0, 0}, std::vector<float>{0, 1, 0, 0}}, {0, 1});
  const auto o = axis.query(std::vector<float>{0, 0, 1, 0}, 2);
  CHECK(o.size() == 2);
  CHECK(o[0].ref_id == 0);
}

TEST_CASE("lsh agrees with the exhaustive scan on clustered data") {
  Rng rng(9);
  const std::size_t dim = 4104;
  std::vector<std::vector<float>> centres;
  for (int c = 0; c < 50; ++c) centres.push_back(unit_gaussian(dim, rng));
  std::vector<std::vector<float>> vs;
  std::vector<std::uint32_t> ids;
  for (std::uint32_t i = 0; i < 1000; ++i) {
    vs.push_back(perturbed(centres[i % 50], 0.15, rng));
    ids.push_back(i);
  }
  const LshIndex idx(vs, ids);
  std::size_t found = 0, rank1 = 0;
  const std::size_t queries = 500;
  for (std::size_t q = 0; q < queries; ++q) {
    const auto query = perturbed(vs[rng.below(1000)], 0.1, rng);
    const auto approx = idx.query(query, 5);
    const auto exact = idx.query_exact(query, 5);
    REQUIRE(approx.size() == 5);
    for (const auto& e : exact)
      found += std::any_of(approx.begin(), approx.end(), [&](const Neighbor& a) { return a.ref_id == e.ref_id; });
    rank1 += approx[0].ref_id == exact[0].ref_id;
  }
  const double recall = static_cast<double>(found) / (5.0 * queries);
  MESSAGE("recall@5 " << recall << " rank-1 agreement " << static_cast<double>(rank1) / queries);
  CHECK(recall >= 0.95);
  CHECK(rank1 >= queries * 95 / 100);
}

TEST_CASE("reference index build, query and round trip") {
  std::vector<NamedImage> imgs;
  for (std::uint32_t i = 0; i < 4; ++i) imgs.push_back({"poster" + std::to_string(i), harness::make_sized_poster(300 + i), i});
  imgs.push_back({"flat", ImageGray8(200, 200, 90), 99});
  BuildReport rep;
  const auto idx = ReferenceIndex::build(imgs, {}, &rep);
  CHECK(idx.size() == 4);
  CHECK(rep.skipped == 1);
  CHECK(rep.warnings.size() == 1);
  CHECK(rep.components == 8);
  for (std::uint32_t i = 0; i < 4; ++i) {
    const auto& e = idx.entry(i);
    CHECK(e.name == "poster" + std::to_string(i));
    CHECK(idx.packed(i).size() == e.descriptors.size() * W);
    const auto nn = idx.query_knn(e.fv, 5);
    REQUIRE(nn.size() == 4);
    CHECK(nn[0].ref_id == i);
  }

  const Bytes bytes = idx.serialize();
  CHECK(std::string(bytes.begin(), bytes.begin() + 5) == "MLNS1");
  const auto back = ReferenceIndex::deserialize(bytes);
  CHECK(back.serialize() == bytes);
  for (std::uint32_t i = 0; i < 4; ++i) CHECK(back.query_knn(idx.entry(i).fv, 3) == idx.query_knn(idx.entry(i).fv, 3));
  const auto probe = idx.encode(poster_descriptors(301));
  CHECK(back.query_knn(probe, 4) == idx.query_knn(probe, 4));
  CHECK(back.lsh().candidates(probe) == idx.lsh().candidates(probe));

  Bytes corrupt = bytes;
  corrupt[corrupt.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(ReferenceIndex::deserialize(corrupt), Error);
  Bytes bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(ReferenceIndex::deserialize(bad_magic), Error);
  CHECK_THROWS_AS(ReferenceIndex::deserialize(std::span<const std::uint8_t>(bytes).first(100)), Error);

  CHECK_THROWS_AS(ReferenceIndex::build({{"flat", ImageGray8(100, 100, 3), 0}}), Error);
}

TEST_CASE("single reference index") {
  const auto idx = ReferenceIndex::build({{"only", harness::make_sized_poster(77), 0}});
  REQUIRE(idx.size() == 1);
  const auto nn = idx.query_knn(idx.entry(0).fv, 5);
  REQUIRE(nn.size() == 1);
  CHECK(nn[0].ref_id == 0);
}
