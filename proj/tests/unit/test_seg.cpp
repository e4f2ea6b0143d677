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

#include "doctest.h"
#include "mlens/harness/scene.hpp"
#include "mlens/seg/segment.hpp"
#include "support.hpp"

using namespace mlens;
using namespace mlens::seg;

namespace {

ImageGray8 with_squares(int w, int h, const std::vector<std::pair<Point2, int>>& squares, std::uint64_t seed) {
  ImageGray8 frame(w, h, 128);
  for (std::size_t k = 0; k < squares.size(); ++k) {
    const auto [origin, side] = squares[k];
    const ImageGray8 tex = testing::textured_image(side, side, seed + k, 1.5);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) frame.at(static_cast<int>(origin.x) + x, static_cast<int>(origin.y) + y) = tex.at(x, y);
  }
  return frame;
}

}  // namespace

TEST_CASE("variance_map") {
  CHECK_THROWS_AS(variance_map(ImageGray8(10, 10, 1), 11, 1), Error);
  const auto flat = variance_map(ImageGray8(64, 48, 77), 16, 8);
  CHECK(flat.width() == (64 - 16) / 8 + 1);
  CHECK(flat.height() == (48 - 16) / 8 + 1);
  for (float v : flat.pixels()) CHECK(v == 0.0f);

  ImageGray8 half(64, 32, 0);
  for (int y = 0; y < 32; ++y)
    for (int x = 32; x < 64; ++x) half.at(x, y) = 255;
  const auto v = variance_map(half, 16, 8);
  // Window at x0 = 24 straddles the edge with 8 + 8 columns.
  CHECK(v.at(3, 0) == doctest::Approx(16256.25));
  CHECK(v.at(0, 0) == 0.0f);
  CHECK(v.at(6, 1) == 0.0f);

  // Brute-force oracle on random data.
  const ImageGray8 rnd = testing::random_image(50, 40, 3);
  const auto rv = variance_map(rnd, 7, 3);
  for (int j = 0; j < rv.height(); ++j)
    for (int i = 0; i < rv.width(); ++i) {
      double s = 0, s2 = 0;
      for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 7; ++x) {
          const double p = rnd.at(i * 3 + x, j * 3 + y);
          s += p;
          s2 += p * p;
        }
      const double mean = s / 49;
      CHECK(rv.at(i, j) == doctest::Approx(s2 / 49 - mean * mean).epsilon(1e-6));
    }
}

TEST_CASE("morphology and components") {
  // 3x3 block survives opening with radius 1, a lone cell does not.
  std::vector<std::uint8_t> m(10 * 10, 0);
  for (int y = 2; y < 5; ++y)
    for (int x = 2; x < 5; ++x) m[y * 10 + x] = 1;
  m[8 * 10 + 8] = 1;
  const auto o = open_mask(m, 10, 10, 1);
  int count = 0;
  for (auto v : o) count += v;
  CHECK(count == 9);
  CHECK(o[8 * 10 + 8] == 0);

  std::vector<std::uint8_t> diag(5 * 5, 0);
  diag[0] = diag[6] = diag[12] = 1;  // diagonal chain is one 8-connected component
  diag[4] = 1;
  std::vector<int> labels;
  CHECK(label_components(diag, 5, 5, labels) == 2);
  CHECK(labels[0] == labels[12]);
  CHECK(labels[4] != labels[0]);
}

TEST_CASE("segment: uniform frame") {
  CHECK(segment(ImageGray8(640, 360, 90)).empty());
  CHECK_THROWS_AS(segment(ImageGray8(32, 80, 90)), Error);
}

TEST_CASE("segment: single textured square") {
  const SegConfig cfg;
  const ImageGray8 frame = with_squares(640, 360, {{{220, 80}, 200}}, 1);
  const auto patches = segment(frame, cfg);
  REQUIRE(patches.size() == 1);
  const auto& p = patches[0];
  CHECK(p.image.width() == 400);
  CHECK(p.image.height() == 400);
  const Quad truth{Point2{219.5, 79.5}, {419.5, 79.5}, {419.5, 279.5}, {219.5, 279.5}};
  const double slack = cfg.morph_radius * cfg.stride + cfg.window;
  for (int c = 0; c < 4; ++c) {
    CHECK(point_in_polygon(truth[c], p.bbox_corners));
    CHECK(distance(p.bbox_corners[c], truth[c]) <= slack * std::sqrt(2.0));
  }
  for (const auto& q : p.polygon) {
    CHECK(q.x >= -0.5);
    CHECK(q.y >= -0.5);
    CHECK(q.x <= 639.5);
    CHECK(q.y <= 359.5);
  }
  // The crop maps patch corners onto the quad.
  CHECK(distance(apply_homography(p.patch_to_frame, {-0.5, -0.5}), p.bbox_corners[0]) < 1e-6);
  CHECK(distance(apply_homography(p.patch_to_frame, {399.5, 399.5}), p.bbox_corners[2]) < 1e-6);
}

TEST_CASE("segment: two posters give two patches") {
  const SegConfig cfg;
  // 64 px = 4 windows of flat background between them.
  const ImageGray8 frame = with_squares(640, 360, {{{60, 80}, 200}, {{324, 80}, 200}}, 2);
  const auto patches = segment(frame, cfg);
  REQUIRE(patches.size() == 2);
  const Point2 c1{160, 180}, c2{424, 180};
  const bool a = point_in_polygon(c1, patches[0].bbox_corners) && point_in_polygon(c2, patches[1].bbox_corners);
  const bool b = point_in_polygon(c2, patches[0].bbox_corners) && point_in_polygon(c1, patches[1].bbox_corners);
  CHECK((a || b));
}

TEST_CASE("segment properties") {
  std::vector<ImageGray8> refs{harness::make_sized_poster(1), harness::make_sized_poster(2)};
  harness::SceneRenderer r(refs);
  const Homography h1 = Homography::translation(40, 60) * Homography::scaling(0.6, 0.6);
  const Homography h2 = Homography::translation(380, 50) * Homography::scaling(0.6, 0.6);
  ImageGray8 frame = r.render({0, 1}, {h1, h2}, harness::RenderOptions{});
  const auto base = segment(frame);
  CHECK(base.size() == 2);
  // Deterministic.
  const auto again = segment(frame);
  REQUIRE(again.size() == base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(again[i].bbox_corners == base[i].bbox_corners);
    CHECK(again[i].image == base[i].image);
  }
  // Brightness offset does not change the patch count (values stay in range).
  ImageGray8 darker = frame;
  for (auto& v : darker.pixels()) v = static_cast<std::uint8_t>(v * 200 / 255);
  ImageGray8 shifted = darker;
  for (auto& v : shifted.pixels()) v = static_cast<std::uint8_t>(v + 30);
  CHECK(segment(darker).size() == segment(shifted).size());
  for (const auto& p : base) CHECK(polygon_area(p.polygon) >= 2500.0);
}

TEST_CASE("whole frame patch") {
  const ImageGray8 frame = testing::textured_image(640, 360, 5);
  const auto p = whole_frame_patch(frame);
  CHECK(p.image.width() == 400);
  CHECK(distance(apply_homography(p.patch_to_frame, {399.5, 399.5}), {639.5, 359.5}) < 1e-6);
}
