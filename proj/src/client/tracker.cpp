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

#include "mlens/client/tracker.hpp"

#include <chrono>
#include <cmath>

namespace mlens::client {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

Tracker::Tracker(TrackerConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
  require(cfg_.cycle_length >= 1, ErrorCode::InvalidArgument, "cycle length must be positive");
  require(cfg_.min_group_points >= 4, ErrorCode::InvalidArgument, "minimum group size must be at least 4");
}

std::vector<TrackedObject> Tracker::objects() const {
  std::vector<TrackedObject> out;
  out.reserve(objects_.size());
  for (const auto& [id, t] : objects_) out.push_back(t.obj);
  return out;
}

std::optional<std::uint32_t> Tracker::snapshot_cycle() const {
  if (!snapshot_) return std::nullopt;
  return snapshot_->cycle_id;
}

std::vector<std::size_t> Tracker::group_indices(ObjectId id) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < features_.bitmap.size(); ++i)
    if (features_.bitmap[i] == static_cast<GroupLabel>(id)) idx.push_back(i);
  return idx;
}

void Tracker::reanchor(ObjectTrack& t) {
  t.anchor_corners = t.obj.corners;
  t.anchor_points = features_.points;
  t.anchor_generation = features_.generation;
}

void Tracker::update_pose(TrackedObject& obj) const {
  static const std::array<Point2, 4> unit{Point2{0, 0}, Point2{1, 0}, Point2{1, 1}, Point2{0, 1}};
  try {
    const Homography h = fit_homography_dlt(unit, obj.corners);
    obj.pose = homography_to_pose(h, Intrinsics::for_frame(width_, height_, cfg_.focal_px));
  } catch (const Error&) {
    // Keep the previous pose; strongly foreshortened quads do not cast.
  }
}

void Tracker::unlink_snapshot() {
  if (!snapshot_ || !snapshot_->linked) return;
  snapshot_->current = features_.points;
  snapshot_->alive.resize(features_.bitmap.size());
  for (std::size_t i = 0; i < features_.bitmap.size(); ++i) snapshot_->alive[i] = features_.bitmap[i] != kLostLabel;
  snapshot_->linked = false;
}

void Tracker::regenerate(const ImageGray8& frame, RegenTrigger trigger) {
  (void)trigger;
  unlink_snapshot();
  features_.points = detect_corners(frame, cfg_.corners);
  ++features_.generation;
  features_.initial_count = features_.points.size();
  features_.bitmap.assign(features_.points.size(), kUnassignedLabel);
  for (const auto& [id, t] : objects_) {
    if (t.obj.stale) continue;
    for (std::size_t i = 0; i < features_.points.size(); ++i)
      if (point_in_polygon(features_.points[i], t.obj.corners)) features_.bitmap[i] = static_cast<GroupLabel>(id);
  }
  for (auto& [id, t] : objects_) reanchor(t);
  new_objects_pending_ = false;
  ++stats_.regenerations;
}

TrackingUpdate Tracker::process_frame(const ImageGray8& frame) {
  const auto t_start = Clock::now();
  if (frame_index_ == 0) {
    width_ = frame.width();
    height_ = frame.height();
  } else if (frame.width() != width_ || frame.height() != height_) {
    fail(ErrorCode::SessionError, "frame size changed within a session");
  }

  TrackingUpdate up;
  up.frame_index = frame_index_;

  auto t0 = Clock::now();
  FlowPyramid pyramid(frame, cfg_.flow.levels);
  if (frame_index_ > 0) {
    std::vector<std::size_t> fs_idx;
    std::vector<Point2> pts;
    for (std::size_t i = 0; i < features_.points.size(); ++i) {
      if (features_.bitmap[i] == kLostLabel) continue;
      fs_idx.push_back(i);
      pts.push_back(features_.points[i]);
    }
    std::vector<std::size_t> snap_idx;
    if (snapshot_ && !snapshot_->linked) {
      for (std::size_t i = 0; i < snapshot_->current.size(); ++i) {
        if (!snapshot_->alive[i]) continue;
        snap_idx.push_back(i);
        pts.push_back(snapshot_->current[i]);
      }
    }
    if (!pts.empty()) {
      const FlowResult fr = track_optical_flow(prev_pyramid_, pyramid, pts, cfg_.flow);
      for (std::size_t k = 0; k < fs_idx.size(); ++k) {
        features_.points[fs_idx[k]] = fr.new_points[k];
        if (!fr.status[k]) features_.bitmap[fs_idx[k]] = kLostLabel;
      }
      for (std::size_t k = 0; k < snap_idx.size(); ++k) {
        const std::size_t j = fs_idx.size() + k;
        snapshot_->current[snap_idx[k]] = fr.new_points[j];
        if (!fr.status[j]) snapshot_->alive[snap_idx[k]] = 0;
      }
    }
  }
  up.timings.flow_ms = ms_since(t0);

  t0 = Clock::now();
  for (auto& [id, t] : objects_) {
    const auto idx = group_indices(id);
    bool updated = false;
    if (idx.size() >= cfg_.min_group_points && t.anchor_generation == features_.generation) {
      std::vector<Point2> src, dst;
      src.reserve(idx.size());
      dst.reserve(idx.size());
      for (std::size_t i : idx) {
        src.push_back(t.anchor_points[i]);
        dst.push_back(features_.points[i]);
      }
      try {
        const RansacResult r = estimate_homography_ransac(src, dst, cfg_.ransac, rng_);
        Quad moved;
        for (int c = 0; c < 4; ++c) moved[c] = apply_homography(r.h, t.anchor_corners[c]);
        if (is_simple_quad(moved)) {
          t.obj.corners = moved;
          updated = true;
          // Points that disagree with their group's motion have drifted
          // off their feature; drop them from the set.
          for (std::size_t k = 0; k < idx.size(); ++k)
            if (!r.inlier_mask[k]) features_.bitmap[idx[k]] = kLostLabel;
        }
      } catch (const Error&) {
      }
    }
    if (updated) {
      t.obj.state = ObjectState::Tracking;
      t.obj.stale = false;
      t.obj.last_support_frame = frame_index_;
      update_pose(t.obj);
    } else if (frame_index_ - t.obj.last_support_frame > static_cast<std::uint64_t>(cfg_.stale_after)) {
      t.obj.stale = true;
    }
  }
  up.timings.update_ms = ms_since(t0);

  t0 = Clock::now();
  RegenTrigger trigger = RegenTrigger::None;
  up.live_before_regeneration = features_.live_count();
  if (frame_index_ == 0)
    trigger = RegenTrigger::Initial;
  else if (new_objects_pending_)
    trigger = RegenTrigger::NewObjects;
  else if (features_.initial_count > 0 &&
           up.live_before_regeneration <
               static_cast<std::size_t>(std::floor(cfg_.low_count_ratio * static_cast<double>(features_.initial_count))))
    trigger = RegenTrigger::LowCount;
  if (trigger != RegenTrigger::None) regenerate(frame, trigger);
  up.regenerated = trigger;
  up.timings.regenerate_ms = ms_since(t0);

  t0 = Clock::now();
  if (cycle_phase_ == 0) {
    const std::uint32_t cycle = next_cycle_id_++;
    net::RecognitionRequest req = net::make_request(frame, cycle, cfg_.client_nonce, cfg_.codec);
    Snapshot snap;
    snap.cycle_id = cycle;
    snap.generation = features_.generation;
    snap.key_points = features_.points;
    snap.scale_x = static_cast<double>(width_) / req.frame_width;
    snap.scale_y = static_cast<double>(height_) / req.frame_height;
    snapshot_ = std::move(snap);
    pending_cycle_ = cycle;
    up.request_to_send = std::move(req);
    ++stats_.requests_sent;
  }
  up.timings.request_ms = ms_since(t0);

  prev_pyramid_ = std::move(pyramid);
  cycle_phase_ = (cycle_phase_ + 1) % cfg_.cycle_length;
  ++frame_index_;
  ++stats_.frames;
  up.objects = objects();
  up.live_points = features_.live_count();
  up.timings.total_ms = ms_since(t_start);
  return up;
}

ResultOutcome Tracker::on_result(const net::ResultMessage& result) {
  if (!snapshot_ || result.cycle_id != snapshot_->cycle_id || result.client_nonce != cfg_.client_nonce) {
    ++stats_.results_discarded;
    return ResultOutcome::Discarded;
  }
  Snapshot& snap = *snapshot_;
  const bool linked = snap.linked;
  std::vector<std::uint8_t> alive_now;
  if (linked) {
    alive_now.resize(features_.bitmap.size());
    for (std::size_t i = 0; i < alive_now.size(); ++i) alive_now[i] = features_.bitmap[i] != kLostLabel;
  }
  const std::vector<Point2>& current = linked ? features_.points : snap.current;
  const std::vector<std::uint8_t>& alive = linked ? alive_now : snap.alive;

  std::optional<Homography> global;
  auto global_motion = [&]() -> Homography {
    if (global) return *global;
    std::vector<Point2> src, dst;
    for (std::size_t i = 0; i < snap.key_points.size(); ++i) {
      if (!alive[i]) continue;
      src.push_back(snap.key_points[i]);
      dst.push_back(current[i]);
    }
    global = Homography::identity();
    if (src.size() >= cfg_.min_group_points) {
      try {
        global = estimate_homography_ransac(src, dst, cfg_.correction, rng_).h;
      } catch (const Error&) {
      }
    }
    return *global;
  };

  for (const auto& ro : result.objects) {
    Quad key_quad;
    for (int c = 0; c < 4; ++c)
      key_quad[c] = {ro.corners[2 * c] * snap.scale_x, ro.corners[2 * c + 1] * snap.scale_y};

    std::vector<std::size_t> inside;
    for (std::size_t i = 0; i < snap.key_points.size(); ++i)
      if (alive[i] && point_in_polygon(snap.key_points[i], key_quad)) inside.push_back(i);

    Homography key_to_now;
    bool have = false;
    std::vector<std::uint8_t> inlier(inside.size(), 1);
    if (inside.size() >= cfg_.min_group_points) {
      std::vector<Point2> src, dst;
      for (std::size_t i : inside) {
        src.push_back(snap.key_points[i]);
        dst.push_back(current[i]);
      }
      try {
        const RansacResult r = estimate_homography_ransac(src, dst, cfg_.correction, rng_);
        key_to_now = r.h;
        inlier = r.inlier_mask;
        have = true;
      } catch (const Error&) {
      }
    }
    if (!have) key_to_now = global_motion();

    Quad corrected;
    try {
      for (int c = 0; c < 4; ++c) corrected[c] = apply_homography(key_to_now, key_quad[c]);
    } catch (const Error&) {
      continue;
    }
    if (!is_simple_quad(corrected)) continue;

    const ObjectId id = ro.object_id;
    auto [it, inserted] = objects_.try_emplace(id);
    ObjectTrack& t = it->second;
    t.obj.id = id;
    t.obj.reference_id = ro.ref_id;
    t.obj.corners = corrected;
    t.obj.stale = false;
    t.obj.last_support_frame = frame_index_;
    t.obj.last_result_frame = frame_index_;
    if (inserted) {
      t.obj.state = ObjectState::Initializing;
      new_objects_pending_ = true;
    } else {
      t.obj.state = ObjectState::Tracking;
    }

    const auto label = static_cast<GroupLabel>(id);
    for (auto& l : features_.bitmap)
      if (l == label) l = kUnassignedLabel;
    if (linked) {
      for (std::size_t k = 0; k < inside.size(); ++k)
        if (inlier[k]) features_.bitmap[inside[k]] = label;
    } else {
      for (std::size_t i = 0; i < features_.points.size(); ++i)
        if (features_.bitmap[i] != kLostLabel && point_in_polygon(features_.points[i], corrected))
          features_.bitmap[i] = label;
    }
    reanchor(t);
    update_pose(t.obj);
  }

  snapshot_.reset();
  pending_cycle_.reset();
  ++stats_.results_applied;
  return ResultOutcome::Applied;
}

double pixel_error(const Quad& tracked, const Quad& truth) {
  return distance(quad_center(tracked), quad_center(truth));
}

}  // namespace mlens::client
