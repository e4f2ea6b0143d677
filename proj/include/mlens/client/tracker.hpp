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

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "mlens/common/random.hpp"
#include "mlens/geom/homography.hpp"
#include "mlens/geom/polygon.hpp"
#include "mlens/geom/pose.hpp"
#include "mlens/img/image.hpp"
#include "mlens/net/wire.hpp"
#include "mlens/track/features.hpp"
#include "mlens/track/optical_flow.hpp"

namespace mlens::client {

using ObjectId = std::uint32_t;

enum class ObjectState { Initializing, Tracking };

struct TrackedObject {
  ObjectId id = 0;
  Quad corners{};  ///< current frame, TL, TR, BR, BL
  std::uint32_t reference_id = 0;
  Pose6DoF pose;
  ObjectState state = ObjectState::Initializing;
  /// No pose update for more than `stale_after` frames.
  bool stale = false;
  std::uint64_t last_support_frame = 0;
  std::uint64_t last_result_frame = 0;
};

struct FrameTimings {
  double flow_ms = 0;
  double update_ms = 0;
  double regenerate_ms = 0;
  double request_ms = 0;
  double total_ms = 0;
};

enum class RegenTrigger { None, Initial, NewObjects, LowCount };

struct TrackingUpdate {
  std::uint64_t frame_index = 0;
  std::vector<TrackedObject> objects;
  std::optional<net::RecognitionRequest> request_to_send;
  RegenTrigger regenerated = RegenTrigger::None;
  std::size_t live_before_regeneration = 0;
  std::size_t live_points = 0;
  FrameTimings timings;
};

enum class ResultOutcome { Applied, Discarded };

struct TrackerConfig {
  int cycle_length = 30;
  CornerConfig corners;
  FlowConfig flow;
  /// Per-frame object update; a tighter threshold than recognition.
  RansacConfig ransac{2.0, 200, 0.995, 8};
  /// Key-to-now correction when a result arrives.
  RansacConfig correction{3.0, 300, 0.995, 8};
  double low_count_ratio = 0.5;
  std::size_t min_group_points = 8;
  int stale_after = 30;
  double focal_px = 500.0;
  net::FrameCodecConfig codec;
  std::uint32_t client_nonce = 1;
  std::uint64_t seed = 42;
};

struct TrackerStats {
  std::uint64_t frames = 0;
  std::uint64_t requests_sent = 0;
  std::uint64_t results_applied = 0;
  std::uint64_t results_discarded = 0;
  std::uint64_t regenerations = 0;
};

/// Client-side state machine: one key frame per logical cycle, optical-flow
/// tracking of a shared feature set whose bitmap attributes points to
/// objects, and correction of delayed recognition results with the motion
/// tracked since their key frame.
///
/// Single-threaded: process_frame and on_result must not run concurrently.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg = {});

  /// Throws SessionError when the frame size differs from the first frame.
  TrackingUpdate process_frame(const ImageGray8& frame);

  /// Applies a recognition result to the current frame. Results whose cycle
  /// id does not match the held key-frame snapshot are discarded.
  ResultOutcome on_result(const net::ResultMessage& result);

  std::uint64_t frame_index() const { return frame_index_; }
  int cycle_phase() const { return cycle_phase_; }
  const FeatureSet& features() const { return features_; }
  std::vector<TrackedObject> objects() const;
  std::optional<std::uint32_t> pending_cycle() const { return pending_cycle_; }
  std::optional<std::uint32_t> snapshot_cycle() const;
  const TrackerStats& stats() const { return stats_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  struct Snapshot {
    std::uint32_t cycle_id = 0;
    std::uint64_t generation = 0;
    std::vector<Point2> key_points;
    /// Where each key point is now. While `linked`, the feature set itself
    /// carries the positions; after a regeneration the snapshot keeps its
    /// own copy and tracks it alongside the new feature set.
    bool linked = true;
    std::vector<Point2> current;
    std::vector<std::uint8_t> alive;
    double scale_x = 1.0;  // request-frame pixels to tracker-frame pixels
    double scale_y = 1.0;
  };

  struct ObjectTrack {
    TrackedObject obj;
    /// Corners and feature positions at the last re-anchoring; each frame
    /// the corners are the anchor corners mapped through anchor->now.
    Quad anchor_corners{};
    std::vector<Point2> anchor_points;
    std::uint64_t anchor_generation = 0;
  };

  void regenerate(const ImageGray8& frame, RegenTrigger trigger);
  void unlink_snapshot();
  void reanchor(ObjectTrack& t);
  void update_pose(TrackedObject& obj) const;
  std::vector<std::size_t> group_indices(ObjectId id) const;

  TrackerConfig cfg_;
  Rng rng_;
  int width_ = 0;
  int height_ = 0;
  std::uint64_t frame_index_ = 0;
  int cycle_phase_ = 0;
  std::uint32_t next_cycle_id_ = 1;
  FeatureSet features_;
  FlowPyramid prev_pyramid_;
  std::optional<Snapshot> snapshot_;
  std::optional<std::uint32_t> pending_cycle_;
  std::map<ObjectId, ObjectTrack> objects_;
  bool new_objects_pending_ = false;
  TrackerStats stats_;
};

/// Distance between the diagonal intersections of two quadrilaterals.
/// Throws DegenerateQuad when either has parallel diagonals.
double pixel_error(const Quad& tracked, const Quad& truth);

}  // namespace mlens::client
