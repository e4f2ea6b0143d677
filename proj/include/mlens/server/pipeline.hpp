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
#include <vector>

#include "mlens/feat/features.hpp"
#include "mlens/geom/homography.hpp"
#include "mlens/index/reference_index.hpp"
#include "mlens/net/wire.hpp"
#include "mlens/seg/segment.hpp"

namespace mlens::server {

struct RecognizeConfig {
  /// Off: the whole frame is treated as one patch.
  bool segmentation = true;
  seg::SegConfig seg;
  std::size_t neighbors = 5;
  feat::MatchConfig match;
  /// Matches a neighbour needs before geometric verification is tried.
  std::size_t min_matches = 15;
  /// Verification in canonical-reference / patch pixels.
  RansacConfig ransac{3.0, 500, 0.995, 12};
  std::size_t max_objects = net::kResultCapacity;
  std::uint64_t seed = 1;
};

struct StageTimings {
  double parse_ms = 0;    ///< request decoding, zero when given a frame
  double segment_ms = 0;
  double encode_ms = 0;   ///< detection, description, Fisher encoding
  double knn_ms = 0;
  double verify_ms = 0;   ///< matching and RANSAC

  double total_ms() const { return parse_ms + segment_ms + encode_ms + knn_ms + verify_ms; }
};

struct Recognition {
  std::uint32_t ref_id = 0;
  Quad corners{};  ///< frame pixels, TL, TR, BR, BL of the reference
  std::size_t matches = 0;
  int inliers = 0;
  std::size_t patch = 0;
};

struct RecognitionOutcome {
  std::uint32_t cycle_id = 0;
  std::vector<Recognition> recognized;
  std::size_t patches = 0;
  StageTimings timings;
};

/// Segments the frame, describes and encodes each patch, queries the k
/// nearest references and verifies them in rank order; the first neighbour
/// with enough matches and a valid homography wins the patch. Patches
/// without a winner are discarded. One recognition per reference (the one
/// with most inliers), at most cfg.max_objects. Deterministic for fixed
/// inputs.
RecognitionOutcome recognize_frame(const retrieval::ReferenceIndex& index, const ImageGray8& frame,
                                   const RecognizeConfig& cfg = {});

/// Decodes the request (timed as the parse stage), then recognizes.
/// Throws MalformedMessage on an undecodable payload.
RecognitionOutcome recognize_request(const retrieval::ReferenceIndex& index, const net::RecognitionRequest& req,
                                     const RecognizeConfig& cfg = {});

/// Per-client object ids: a reference keeps the id it was first given.
class ObjectIds {
 public:
  std::uint16_t id_for(std::uint32_t ref_id);

 private:
  std::map<std::uint32_t, std::uint16_t> ids_;
};

/// Packs an outcome into the wire result for one client.
net::ResultMessage make_result(const RecognitionOutcome& outcome, std::uint32_t client_nonce, ObjectIds& ids);

}  // namespace mlens::server
