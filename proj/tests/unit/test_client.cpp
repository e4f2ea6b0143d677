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
#include <deque>

#include "doctest.h"
#include "mlens/client/tracker.hpp"
#include "mlens/harness/scene.hpp"
#include "support.hpp"

using namespace mlens;
using namespace mlens::client;

namespace {

net::ResultMessage result_for(std::uint32_t cycle, const Quad& q, std::uint16_t id = 1, std::uint32_t ref = 0) {
  net::ResultMessage m;
  m.client_nonce = 1;
  m.cycle_id = cycle;
  net::RecognizedObject o;
  o.object_id = id;
  o.ref_id = ref;
  for (int i = 0; i < 4; ++i) {
    o.corners[2 * i] = static_cast<float>(q[i].x);
    o.corners[2 * i + 1] = static_cast<float>(q[i].y);
  }
  m.objects.push_back(o);
  return m;
}

/// Textured square poster on a flat background, shifted by (dx, dy).
ImageGray8 poster_scene(const ImageGray8& poster, double dx, double dy) {
  harness::SceneRenderer r({poster});
  const Homography h = Homography::translation(220 + dx, 80 + dy);
  return r.render({0}, {h}, harness::RenderOptions{});
}

Quad poster_quad(const ImageGray8& poster, double dx, double dy) {
  Quad q = harness::reference_corners(poster.width(), poster.height());
  for (auto& p : q) p = p + Point2{220 + dx, 80 + dy};
  return q;
}

Quad float_rounded(const Quad& q) {
  Quad out;
  for (int i = 0; i < 4; ++i) out[i] = {static_cast<float>(q[i].x), static_cast<float>(q[i].y)};
  return out;
}

}  // namespace

TEST_CASE("pixel_error") {
  const Quad sq{Point2{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK(pixel_error(sq, sq) == 0.0);
  Quad moved = sq;
  for (auto& p : moved) p = p + Point2{3, 4};
  CHECK(pixel_error(sq, moved) == doctest::Approx(5.0));
  // Perturb TR by (0.4, 0): diagonal TL-BR is y = x, diagonal TR'-BL runs
  // from (1.4, 0) to (0, 1): y = 1 - x / 1.4. Intersection x = 1.4 / 2.4.
  Quad pert = sq;
  pert[1].x += 0.4;
  const double cx = 1.4 / 2.4;
  CHECK(pixel_error(sq, pert) == doctest::Approx(std::hypot(cx - 0.5, cx - 0.5)).epsilon(1e-12));
  const Quad flat{Point2{0, 0}, {1, 0}, {2, 0}, {3, 0}};
  CHECK_THROWS_AS(pixel_error(flat, sq), Error);
}

TEST_CASE("cycle scheduling and session rules") {
  const ImageGray8 poster = harness::make_poster(3, 200, 200);
  const ImageGray8 frame = poster_scene(poster, 0, 0);
  Tracker tr;
  for (int t = 0; t < 65; ++t) {
    const auto up = tr.process_frame(frame);
    CHECK(up.request_to_send.has_value() == (t % 30 == 0));
    if (t == 0) {
      CHECK(up.objects.empty());
      CHECK(up.request_to_send->cycle_id == 1);
    }
    CHECK(tr.features().points.size() == tr.features().bitmap.size());
    CHECK(tr.cycle_phase() < 30);
  }
  CHECK(tr.stats().requests_sent == 3);
  CHECK_THROWS_AS(tr.process_frame(ImageGray8(320, 180, 0)), Error);
}

TEST_CASE("static scene keeps corners") {
  const ImageGray8 poster = harness::make_poster(4, 200, 200);
  const ImageGray8 frame = poster_scene(poster, 0, 0);
  const Quad truth = poster_quad(poster, 0, 0);
  Tracker tr;
  auto up = tr.process_frame(frame);
  const auto cycle = up.request_to_send->cycle_id;
  for (int t = 1; t < 5; ++t) tr.process_frame(frame);
  CHECK(tr.on_result(result_for(cycle, truth)) == ResultOutcome::Applied);
  const Quad expected = float_rounded(truth);
  for (int t = 0; t < 60; ++t) {
    up = tr.process_frame(frame);
    REQUIRE(up.objects.size() == 1);
    for (int c = 0; c < 4; ++c) CHECK(distance(up.objects[0].corners[c], expected[c]) < 0.5);
  }
  CHECK(up.objects[0].state == ObjectState::Tracking);
}

TEST_CASE("result correction replays motion since the key frame") {
  const ImageGray8 poster = harness::make_poster(5, 200, 200);
  SUBCASE("zero motion") {
    Tracker tr;
    const ImageGray8 frame = poster_scene(poster, 0, 0);
    const auto cycle = tr.process_frame(frame).request_to_send->cycle_id;
    tr.process_frame(frame);
    const Quad q = poster_quad(poster, 0, 0);
    REQUIRE(tr.on_result(result_for(cycle, q)) == ResultOutcome::Applied);
    const auto objs = tr.objects();
    REQUIRE(objs.size() == 1);
    for (int c = 0; c < 4; ++c) CHECK(distance(objs[0].corners[c], float_rounded(q)[c]) < 1e-6);
  }
  SUBCASE("translation (10, 0)") {
    Tracker tr;
    const auto cycle = tr.process_frame(poster_scene(poster, 0, 0)).request_to_send->cycle_id;
    for (int step = 1; step <= 5; ++step) tr.process_frame(poster_scene(poster, 2.0 * step, 0));
    REQUIRE(tr.on_result(result_for(cycle, poster_quad(poster, 0, 0))) == ResultOutcome::Applied);
    const Quad expected = poster_quad(poster, 10, 0);
    const auto objs = tr.objects();
    REQUIRE(objs.size() == 1);
    for (int c = 0; c < 4; ++c) CHECK(distance(objs[0].corners[c], expected[c]) < 1.0);
  }
  SUBCASE("stale results are discarded") {
    Tracker tr;
    const ImageGray8 frame = poster_scene(poster, 0, 0);
    const auto first = tr.process_frame(frame).request_to_send->cycle_id;
    for (int t = 1; t <= 30; ++t) tr.process_frame(frame);
    CHECK(tr.snapshot_cycle() == first + 1);
    CHECK(tr.on_result(result_for(first, poster_quad(poster, 0, 0))) == ResultOutcome::Discarded);
    CHECK(tr.objects().empty());
    CHECK(tr.stats().results_discarded == 1);
  }
}

TEST_CASE("regeneration triggers") {
  const ImageGray8 poster = harness::make_poster(6, 200, 200);
  SUBCASE("new objects") {
    Tracker tr;
    const ImageGray8 frame = poster_scene(poster, 0, 0);
    const auto cycle = tr.process_frame(frame).request_to_send->cycle_id;
    tr.process_frame(frame);
    tr.on_result(result_for(cycle, poster_quad(poster, 0, 0), 2));
    const auto up = tr.process_frame(frame);
    CHECK(up.regenerated == RegenTrigger::NewObjects);
    // Every point inside the object carries its label, the rest are unassigned.
    const auto& fs = tr.features();
    const Quad q = poster_quad(poster, 0, 0);
    for (std::size_t i = 0; i < fs.points.size(); ++i)
      CHECK(fs.bitmap[i] == (point_in_polygon(fs.points[i], q) ? 2 : kUnassignedLabel));
  }
  SUBCASE("points outside every object stay unassigned") {
    Tracker tr;
    const ImageGray8 frame = poster_scene(poster, 0, 0);
    const auto cycle = tr.process_frame(frame).request_to_send->cycle_id;
    tr.process_frame(frame);
    // A result quad over the flat background contains no feature points.
    const Quad empty_area{Point2{5, 5}, {60, 5}, {60, 60}, {5, 60}};
    tr.on_result(result_for(cycle, empty_area, 3));
    tr.process_frame(frame);
    for (auto l : tr.features().bitmap) CHECK(l == kUnassignedLabel);
  }
  SUBCASE("low count at half the initial extraction") {
    // Texture everywhere, then the left part goes flat so its points die.
    const ImageGray8 full = testing::textured_image(640, 360, 8, 2.0);
    Tracker tr;
    tr.process_frame(full);
    const std::size_t initial = tr.features().initial_count;
    REQUIRE(initial == 180);
    bool fired = false;
    for (int cut = 100; cut <= 640 && !fired; cut += 60) {
      ImageGray8 f = full;
      for (int y = 0; y < 360; ++y)
        for (int x = 0; x < cut; ++x) f.at(x, y) = 128;
      const auto up = tr.process_frame(f);
      const bool below = up.live_before_regeneration < initial / 2;
      CHECK((up.regenerated == RegenTrigger::LowCount) == below);
      fired = up.regenerated == RegenTrigger::LowCount;
    }
    CHECK(fired);
  }
}

TEST_CASE("latency hiding is independent of the delay") {
  const std::vector<ImageGray8> refs{harness::make_sized_poster(9)};
  harness::ScriptParams sp;
  sp.duration = 60;
  const auto pl = harness::centered_placement(0, refs[0].width(), refs[0].height(), 640, 360, 180);
  const auto script = harness::make_script(harness::ScriptKind::FastMove, {pl}, sp);
  const auto seq = harness::generate_sequence(refs, script);
  for (int delay : {1, 5, 15, 29}) {
    Tracker tr;
    std::deque<std::pair<int, net::ResultMessage>> inflight;
    for (int t = 0; t < sp.duration; ++t) {
      bool applied = false;
      while (!inflight.empty() && inflight.front().first <= t) {
        applied |= tr.on_result(inflight.front().second) == ResultOutcome::Applied;
        inflight.pop_front();
      }
      const auto up = tr.process_frame(seq.frames[t]);
      if (up.request_to_send)
        inflight.emplace_back(t + delay, result_for(up.request_to_send->cycle_id, seq.truth[t][0]));
      if (applied) {
        REQUIRE(up.objects.size() == 1);
        CHECK(pixel_error(up.objects[0].corners, seq.truth[t][0]) <= 2.0);
        for (int c = 0; c < 4; ++c) CHECK(distance(up.objects[0].corners[c], seq.truth[t][0][c]) <= 2.0);
      }
    }
    CHECK(tr.stats().results_applied == 2);
  }
}
