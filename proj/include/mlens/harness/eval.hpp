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

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mlens/client/tracker.hpp"
#include "mlens/harness/scene.hpp"
#include "mlens/index/reference_index.hpp"
#include "mlens/net/transport.hpp"
#include "mlens/server/pipeline.hpp"
#include "mlens/server/server.hpp"

namespace mlens::harness {

inline constexpr double kFramePeriodMs = 1000.0 / 30.0;

/// ceil(latency_ms / period): frames that pass before a result can be shown.
int frames_passed(double latency_ms, double period_ms = kFramePeriodMs);

// ---------------------------------------------------------------- indexing

struct DirectoryBuild {
  retrieval::ReferenceIndex index;
  retrieval::BuildReport report;
};

/// Indexes every regular file of `dir` in filename order, the filename being
/// the reference name. Unreadable files are reported in report.warnings and
/// skipped. Throws BuildFailed when no image is usable.
DirectoryBuild build_index_from_directory(const std::filesystem::path& dir,
                                          const retrieval::IndexBuildConfig& cfg = {});

// ---------------------------------------------------------------- tracking

enum class TransportKind { Simulated, Loopback };

struct TrackingEvalConfig {
  client::TrackerConfig tracker;
  server::ServerConfig server;
  TransportKind transport = TransportKind::Simulated;
  /// Loss and delay on both directions.
  net::LinkModel link;
  /// Simulated recognition time; negative uses the measured wall time
  /// (not reproducible).
  double server_ms = 50.0;
  double frame_period_ms = kFramePeriodMs;
  /// Index id of each placement of the sequence; empty means the placement
  /// order.
  std::vector<std::uint32_t> truth_ref_ids;
};

struct FrameRecord {
  int frame = 0;
  /// Per placement; NaN while no object of that reference is tracked.
  std::vector<double> errors;
  /// Objects whose reference is not in the frame.
  std::size_t false_objects = 0;
  bool result_frame = false;
  std::size_t live_points = 0;
  client::FrameTimings timings;
  /// Time spent handing results to the tracker and sending the request.
  double network_ms = 0;
};

struct CycleRecord {
  std::uint32_t cycle_id = 0;
  int key_frame = 0;
  bool answered = false;
  bool applied = false;
  int result_frame = -1;
  double latency_ms = std::numeric_limits<double>::quiet_NaN();
  int frames_passed = -1;
  std::size_t objects = 0;
  std::size_t request_bytes = 0;
};

struct EvalReport {
  std::vector<FrameRecord> frames;
  std::vector<CycleRecord> cycles;
  /// 1000 / tracker time, per frame.
  std::vector<double> fps;
  std::size_t placements = 0;
};

struct TrackingSummary {
  double mean_error = 0;
  double max_error = 0;
  /// Largest error on a frame where a result was applied.
  double max_result_frame_error = 0;
  std::size_t tracked_samples = 0;
  std::size_t untracked_samples = 0;
  std::size_t false_objects = 0;
  std::size_t cycles = 0;
  std::size_t answered = 0;
  std::size_t applied = 0;
  double mean_frame_ms = 0;
  double max_frame_ms = 0;
  int max_frames_passed = 0;
  int first_tracked_frame = -1;
};

TrackingSummary summarize(const EvalReport& report);

/// Runs the client tracker against the recognition pipeline, frame by frame.
/// Simulated: a shared clock steps at the frame period and the server takes
/// cfg.server_ms per request; deterministic. Loopback: a UDP server on
/// 127.0.0.1 and wall-clock frame pacing. Results are handed to the tracker
/// before the first frame at or after their arrival.
EvalReport eval_tracking(std::shared_ptr<const retrieval::ReferenceIndex> index, const Sequence& sequence,
                         const TrackingEvalConfig& cfg = {});

/// Live client against a running server, paced by the wall clock. The
/// server fields of cfg are unused; cfg.link impairs the client side.
EvalReport track_remote(const net::Endpoint& server, const Sequence& sequence, const TrackingEvalConfig& cfg = {});

/// JSON lines: one "frame" record per frame and one "cycle" record per cycle.
std::string report_jsonl(const EvalReport& report);

// ---------------------------------------------------------------- budget

struct BudgetRow {
  int points = 0;
  double mean_live_points = 0;
  double mean_total_ms = 0;
  double mean_flow_ms = 0;
  double mean_update_ms = 0;
  double mean_regenerate_ms = 0;
  double mean_request_ms = 0;
  double fps = 0;
};

/// Per-frame tracker cost at each feature budget. Results come straight
/// from the ground truth on the frame after each key frame, so the object
/// update runs as it would in a live session.
std::vector<BudgetRow> eval_frame_budget(const Sequence& sequence, const std::vector<int>& point_counts,
                                         const client::TrackerConfig& base = {});

// ---------------------------------------------------------------- retrieval

struct RetrievalQuery {
  ImageGray8 image;
  /// Index ids of the references in the image.
  std::vector<std::uint32_t> labels;
};

struct QuerySetConfig {
  /// One indexed reference per frame.
  std::size_t single = 200;
  /// Several indexed references plus distractors per frame.
  std::size_t multi = 0;
  int targets_per_multi = 2;
  int distractors_per_multi = 1;
  double max_angle_deg = 30.0;
  double noise_sigma = 2.0;
  int width = 640;
  int height = 360;
  std::uint64_t seed = 5;
};

/// Perspective-warped renders of `references` (index id = position) over a
/// flat background. Distractors are never labeled.
std::vector<RetrievalQuery> make_query_set(const std::vector<ImageGray8>& references,
                                           const std::vector<ImageGray8>& distractors, const QuerySetConfig& cfg);

/// Frames with the given references unwarped and centred; the retrieval
/// sanity case.
std::vector<RetrievalQuery> make_identity_queries(const std::vector<ImageGray8>& references, int width = 640,
                                                  int height = 360);

struct RetrievalEvalConfig {
  std::vector<int> resolutions{100, 200, 400};
  bool segmentation = true;
  seg::SegConfig seg;
  std::size_t k = 5;
};

struct RetrievalRow {
  int resolution = 0;
  bool segmentation = true;
  /// top_k[i]: fraction of (query, label) pairs among the first i+1
  /// neighbours of some patch.
  std::array<double, 5> top_k{};
  /// Mean over queries of the average precision of the first k results.
  double map = 0;
  std::size_t queries = 0;
  double ms_per_query = 0;
};

/// One row per resolution. Each patch is sampled at resolution x resolution,
/// then brought to the index's canonical size for description, so lower
/// resolutions model smaller targets in the frame. The per-patch lists are
/// merged by distance into one ranking. Without segmentation the whole frame
/// is one patch. Throws InvalidArgument for a query without labels.
std::vector<RetrievalRow> eval_retrieval(const retrieval::ReferenceIndex& index,
                                         const std::vector<RetrievalQuery>& queries,
                                         const RetrievalEvalConfig& cfg = {});

/// Average precision of `ranked` against `relevant` over the first k
/// entries, normalised by min(|relevant|, k).
double average_precision(const std::vector<std::uint32_t>& ranked, const std::vector<std::uint32_t>& relevant,
                         std::size_t k);

// ---------------------------------------------------------------- latency

struct LatencyEvalConfig {
  int tasks = 200;
  TransportKind transport = TransportKind::Loopback;
  net::LinkModel link;
  server::ServerConfig server;
  net::FrameCodecConfig codec;
  /// A task still unanswered after this long is lost.
  double timeout_ms = 1000.0;
  /// Simulated transport only.
  double server_ms = 50.0;
  double frame_period_ms = kFramePeriodMs;
};

struct LatencyReport {
  /// Per task; NaN for lost tasks.
  std::vector<double> latency_ms;
  std::vector<int> frames_passed;
  std::size_t completed = 0;
  std::size_t lost = 0;
  std::vector<std::size_t> request_bytes;
  /// Server stage means over processed requests (loopback only).
  double parse_ms = 0, segment_ms = 0, encode_ms = 0, knn_ms = 0, verify_ms = 0, server_total_ms = 0;

  /// Fraction of all tasks answered within `ms`.
  double fraction_within(double ms) const;
  double percentile(double p) const;
};

/// Sends one recognition request at a time, cycling through `frames`, and
/// waits for its result before the next.
LatencyReport eval_latency(std::shared_ptr<const retrieval::ReferenceIndex> index,
                           const std::vector<ImageGray8>& frames, const LatencyEvalConfig& cfg = {});

// ---------------------------------------------------------------- files

/// frame_NNNN.png per frame plus truth.jsonl ({"frame", "corners"}).
void write_sequence(const std::filesystem::path& dir, const Sequence& sequence);

/// Reads what write_sequence wrote.
Sequence read_sequence(const std::filesystem::path& dir);

}  // namespace mlens::harness
