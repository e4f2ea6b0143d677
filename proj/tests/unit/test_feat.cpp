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
#include <set>

#include "doctest.h"
#include "mlens/feat/features.hpp"
#include "mlens/harness/scene.hpp"
#include "support.hpp"

using namespace mlens;
using namespace mlens::feat;

namespace {

/// Brute-force segment test at one threshold, straight from the definition.
bool is_corner_at(const ImageGray8& img, int x, int y, int t) {
  static const int circle[16][2] = {{0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
                                    {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};
  const int c = img.at(x, y);
  for (int start = 0; start < 16; ++start) {
    bool bright = true, dark = true;
    for (int j = 0; j < 9; ++j) {
      const int v = img.at(x + circle[(start + j) % 16][0], y + circle[(start + j) % 16][1]);
      bright = bright && v > c + t;
      dark = dark && v < c - t;
    }
    if (bright || dark) return true;
  }
  return false;
}

ImageGray8 rotate90(const ImageGray8& in) {
  ImageGray8 out(in.height(), in.width());
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x) out.at(in.height() - 1 - y, x) = in.at(x, y);
  return out;
}

std::vector<Descriptor512> texture_descriptors(std::uint64_t seed) {
  const ImageGray8 img = harness::make_poster(seed, 400, 400);
  const auto kps = detect_agast(img);
  return extract_freak(img, kps).descriptors;
}

}  // namespace

TEST_CASE("segment test score agrees with the brute-force definition") {
  const ImageGray8 img = testing::textured_image(64, 64, 3, 1.0);
  for (int y = 3; y < 61; y += 3)
    for (int x = 3; x < 61; x += 2) {
      const int s = segment_test_score(img, x, y);
      for (int t : {0, 5, 10, 20, 40, 80}) CHECK((s > t) == is_corner_at(img, x, y, t));
    }
}

TEST_CASE("detect_agast basics") {
  CHECK_THROWS_AS(detect_agast(ImageGray8(47, 100, 0)), Error);
  CHECK(detect_agast(ImageGray8(120, 90, 140)).empty());

  const ImageGray8 img = testing::textured_image(200, 160, 9, 1.5);
  AgastConfig one;
  one.octaves = 1;
  one.max_keypoints = 100000;
  const auto kps = detect_agast(img, one);
  REQUIRE(!kps.empty());
  for (const auto& k : kps) {
    // The winning pixel is one of the integer positions within half a pixel.
    bool found = false;
    for (int x : {static_cast<int>(std::floor(k.pt.x)), static_cast<int>(std::ceil(k.pt.x))})
      for (int y : {static_cast<int>(std::floor(k.pt.y)), static_cast<int>(std::ceil(k.pt.y))}) {
        if (std::fabs(k.pt.x - x) > 0.5 || std::fabs(k.pt.y - y) > 0.5) continue;
        if (segment_test_score(img, x, y) != static_cast<int>(k.score)) continue;
        bool is_max = true;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) is_max = is_max && segment_test_score(img, x + dx, y + dy) <= k.score;
        found = found || is_max;
      }
    CHECK(k.score > one.threshold);
    CHECK(found);
  }
  for (std::size_t i = 1; i < kps.size(); ++i) CHECK(kps[i - 1].score >= kps[i].score);

  AgastConfig capped;
  capped.max_keypoints = 25;
  CHECK(detect_agast(img, capped).size() == 25);
}

TEST_CASE("disc keypoints lie on the rim") {
  for (double radius : {5.0, 40.0}) {
    ImageGray8 img(160, 160, 0);
    for (int y = 0; y < 160; ++y)
      for (int x = 0; x < 160; ++x)
        if (std::hypot(x - 80.0, y - 80.0) <= radius) img.at(x, y) = 255;
    const auto kps = detect_agast(img);
    CHECK(!kps.empty());
    for (const auto& k : kps) CHECK(std::fabs(std::hypot(k.pt.x - 80.0, k.pt.y - 80.0) - radius) <= 3.0);
  }
}

TEST_CASE("keypoints repeat one octave up on a 2x image") {
  const ImageGray8 img = harness::make_poster(11, 320, 240);
  const ImageGray8 big = resize(img, 640, 480);
  AgastConfig cfg;
  cfg.max_keypoints = 100000;
  const auto small_kps = detect_agast(img, cfg);
  const auto big_kps = detect_agast(big, cfg);
  std::size_t considered = 0, reproduced = 0;
  for (const auto& k : small_kps) {
    if (k.octave + 1 >= cfg.octaves) continue;
    ++considered;
    const Point2 p{(k.pt.x + 0.5) * 2 - 0.5, (k.pt.y + 0.5) * 2 - 0.5};
    for (const auto& b : big_kps)
      if (b.octave == k.octave + 1 && std::hypot(b.pt.x - p.x, b.pt.y - p.y) <= 3.0) {
        ++reproduced;
        break;
      }
  }
  REQUIRE(considered > 50);
  MESSAGE("repeatability " << static_cast<double>(reproduced) / considered);
  CHECK(static_cast<double>(reproduced) >= 0.7 * static_cast<double>(considered));
}

TEST_CASE("freak is deterministic and drops border keypoints") {
  const ImageGray8 img = harness::make_poster(5, 300, 260);
  const auto kps = detect_agast(img);
  const auto a = extract_freak(img, kps);
  const auto b = extract_freak(img, kps);
  REQUIRE(a.descriptors.size() == b.descriptors.size());
  for (std::size_t i = 0; i < a.descriptors.size(); ++i) CHECK(a.descriptors[i].bits == b.descriptors[i].bits);
  CHECK(a.descriptors.size() + a.dropped == kps.size());
  CHECK(detect_agast(img).size() == kps.size());

  const std::vector<Keypoint> edge{{{5.0, 130.0}, 0, 50}, {{150.0, 5.0}, 0, 50}, {{294.0, 130.0}, 0, 50},
                                   {{150.0, 130.0}, 0, 50}, {{150.0, 130.0}, 3, 50}};
  const auto r = extract_freak(img, edge);
  CHECK(r.dropped == 4);
  REQUIRE(r.descriptors.size() == 1);
  CHECK(r.descriptors[0].keypoint.x == 150.0);
  CHECK(freak_support_radius(0) == 23.0);
  CHECK(freak_support_radius(1) == 45.0);
}

TEST_CASE("freak is invariant to a 90 degree rotation") {
  const ImageGray8 img = harness::make_poster(21, 320, 320);
  const ImageGray8 rot = rotate90(img);
  std::vector<Keypoint> kps, rkps;
  for (const auto& k : detect_agast(img)) {
    // Keep pairs well inside the support in both images.
    const double margin = freak_support_radius(k.octave) + 1;
    if (std::min({k.pt.x, k.pt.y, img.width() - k.pt.x, img.height() - k.pt.y}) <= margin) continue;
    kps.push_back(k);
    rkps.push_back({{img.height() - 1 - k.pt.y, k.pt.x}, k.octave, k.score});
  }
  const auto a = extract_freak(img, kps).descriptors;
  const auto b = extract_freak(rot, rkps).descriptors;
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() > 50);
  std::vector<std::uint32_t> d;
  for (std::size_t i = 0; i < a.size(); ++i) d.push_back(hamming(a[i], b[i]));
  std::sort(d.begin(), d.end());
  const std::size_t close = static_cast<std::size_t>(std::lower_bound(d.begin(), d.end(), 80u) - d.begin());
  MESSAGE("median hamming " << d[d.size() / 2] << ", under 80: " << close << "/" << d.size());
  // Keypoints whose orientation flips to another bin decorrelate, so the
  // bound applies to the typical keypoint.
  CHECK(d[d.size() / 2] < 80);
}

TEST_CASE("hamming is a metric") {
  Rng rng(4);
  auto random_desc = [&] {
    Descriptor512 d;
    for (auto& w : d.bits) w = rng.next();
    return d;
  };
  for (int i = 0; i < 200; ++i) {
    const auto a = random_desc(), b = random_desc(), c = random_desc();
    CHECK(hamming(a, a) == 0);
    CHECK(hamming(a, b) == hamming(b, a));
    CHECK(hamming(a, b) <= 512);
    CHECK(hamming(a, c) <= hamming(a, b) + hamming(b, c));
    std::uint32_t naive = 0;
    for (std::size_t k = 0; k < 512; ++k) naive += a.bit(k) != b.bit(k);
    CHECK(hamming(a, b) == naive);
  }
}

TEST_CASE("matching") {
  const auto ref = texture_descriptors(31);
  REQUIRE(ref.size() > 100);
  CHECK_THROWS_AS(match_descriptors({}, ref), Error);
  CHECK_THROWS_AS(match_descriptors(ref, {}), Error);

  SUBCASE("self match") {
    const auto m = match_descriptors(ref, ref);
    std::set<std::uint32_t> seen;
    for (const auto& p : m) {
      CHECK(p.query_idx == p.reference_idx);
      CHECK(p.hamming == 0);
      seen.insert(p.query_idx);
    }
    // Exact duplicates fail the ratio test; everything else matches itself.
    std::size_t unique = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      bool dup = false;
      for (std::size_t j = 0; j < ref.size() && !dup; ++j) dup = j != i && ref[j].bits == ref[i].bits;
      if (!dup) {
        ++unique;
        CHECK(seen.count(static_cast<std::uint32_t>(i)) == 1);
      }
    }
    CHECK(seen.size() == unique);
  }

  SUBCASE("five percent bit flips") {
    Rng rng(77);
    std::vector<std::size_t> perm(ref.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<Descriptor512> query;
    for (std::size_t src : perm) {
      Descriptor512 d = ref[src];
      std::set<std::size_t> flips;
      while (flips.size() < 26) flips.insert(rng.below(512));
      for (std::size_t b : flips) d.bits[b >> 6] ^= std::uint64_t{1} << (b & 63);
      query.push_back(d);
    }
    const auto m = match_descriptors(query, ref);
    std::size_t correct = 0;
    std::set<std::uint32_t> qs, rs;
    for (const auto& p : m) {
      correct += perm[p.query_idx] == p.reference_idx;
      qs.insert(p.query_idx);
      rs.insert(p.reference_idx);
      CHECK(p.hamming == hamming(query[p.query_idx], ref[p.reference_idx]));
    }
    CHECK(qs.size() == m.size());
    CHECK(rs.size() == m.size());
    MESSAGE("correct " << correct << "/" << ref.size());
    CHECK(correct >= ref.size() * 9 / 10);
  }

  SUBCASE("random queries rarely survive") {
    Rng rng(78);
    std::vector<Descriptor512> query(ref.size());
    for (auto& d : query)
      for (auto& w : d.bits) w = rng.next();
    const auto m = match_descriptors(query, ref);
    CHECK(m.size() * 20 < query.size());
  }

  SUBCASE("packed and unpacked agree") {
    const auto other = texture_descriptors(32);
    const auto a = match_descriptors(other, ref);
    const auto b = match_packed(pack_bits(other), pack_bits(ref));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].query_idx == b[i].query_idx);
      CHECK(a[i].reference_idx == b[i].reference_idx);
    }
    CHECK_THROWS_AS(match_packed(std::vector<std::uint64_t>(7), pack_bits(ref)), Error);
  }
}
