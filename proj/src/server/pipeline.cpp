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

#include "mlens/server/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>

#include "mlens/common/random.hpp"

namespace mlens::server {
namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

/// Frame corners of a verified reference, or nothing when the mapping is
/// implausible: folded, mirrored, collapsed, or far outside the frame.
std::optional<Quad> frame_corners(const Homography& ref_to_patch, const seg::SegmentPatch& patch, const Quad& ref,
                                  int frame_w, int frame_h) {
  Quad q;
  try {
    const Homography h = patch.patch_to_frame * ref_to_patch;
    for (std::size_t i = 0; i < 4; ++i) q[i] = apply_homography(h, ref[i]);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (!is_simple_quad(q)) return std::nullopt;
  if (signed_area(q) * signed_area(ref) <= 0.0) return std::nullopt;
  if (polygon_area(q) < 400.0) return std::nullopt;
  const double mx = 0.1 * frame_w, my = 0.1 * frame_h;
  for (const auto& p : q)
    if (p.x < -0.5 - mx || p.x > frame_w - 0.5 + mx || p.y < -0.5 - my || p.y > frame_h - 0.5 + my)
      return std::nullopt;
  return q;
}

}  // namespace

RecognitionOutcome recognize_frame(const retrieval::ReferenceIndex& index, const ImageGray8& frame,
                                   const RecognizeConfig& cfg) {
  RecognitionOutcome out;
  auto t = Clock::now();
  std::vector<seg::SegmentPatch> patches;
  if (cfg.segmentation) patches = seg::segment(frame, cfg.seg);
  else patches.push_back(seg::whole_frame_patch(frame, cfg.seg.patch_size));
  out.patches = patches.size();
  auto now = Clock::now();
  out.timings.segment_ms = ms_between(t, now);
  t = now;

  const retrieval::DescribeConfig& dcfg = index.describe_config();
  std::vector<Recognition> found;
  for (std::size_t pi = 0; pi < patches.size(); ++pi) {
    const auto& patch = patches[pi];
    auto desc = retrieval::describe_image(patch.image, dcfg);
    if (desc.descriptors.size() < cfg.min_matches) {
      now = Clock::now();
      out.timings.encode_ms += ms_between(t, now);
      t = now;
      continue;
    }
    const auto fv = index.encode(desc.descriptors);
    now = Clock::now();
    out.timings.encode_ms += ms_between(t, now);
    t = now;

    const auto neighbors = index.query_knn(fv, cfg.neighbors);
    now = Clock::now();
    out.timings.knn_ms += ms_between(t, now);
    t = now;

    const auto query_bits = feat::pack_bits(desc.descriptors);
    for (std::size_t rank = 0; rank < neighbors.size(); ++rank) {
      const auto& ref = index.entry(neighbors[rank].ref_id);
      const auto matches = feat::match_packed(query_bits, index.packed(ref.id), cfg.match);
      if (matches.size() < cfg.min_matches) continue;
      std::vector<Point2> src, dst;
      for (const auto& m : matches) {
        src.push_back(ref.descriptors[m.reference_idx].keypoint);
        dst.push_back(desc.descriptors[m.query_idx].keypoint);
      }
      Rng rng = Rng(cfg.seed).fork(pi * 64 + rank);
      RansacResult fit;
      try {
        fit = estimate_homography_ransac(src, dst, cfg.ransac, rng);
      } catch (const Error&) {
        continue;
      }
      // Coarse-octave keypoints are quantized to 2^octave pixels; refit on
      // the fine inliers when there are enough of them.
      std::vector<Point2> fine_src, fine_dst;
      for (std::size_t i = 0; i < matches.size(); ++i)
        if (fit.inlier_mask[i] && ref.descriptors[matches[i].reference_idx].octave <= 1 &&
            desc.descriptors[matches[i].query_idx].octave <= 1) {
          fine_src.push_back(src[i]);
          fine_dst.push_back(dst[i]);
        }
      if (fine_src.size() >= static_cast<std::size_t>(cfg.ransac.min_inliers)) {
        try {
          fit.h = fit_homography_dlt(fine_src, fine_dst);
        } catch (const Error&) {
        }
      }
      const auto corners = frame_corners(fit.h, patch, ref.corners, frame.width(), frame.height());
      if (!corners) continue;
      found.push_back({ref.id, *corners, matches.size(), fit.inlier_count, pi});
      break;
    }
    now = Clock::now();
    out.timings.verify_ms += ms_between(t, now);
    t = now;
  }

  // One recognition per reference, strongest first, capped to what a
  // result datagram can carry.
  std::stable_sort(found.begin(), found.end(), [](const Recognition& a, const Recognition& b) {
    return a.inliers != b.inliers ? a.inliers > b.inliers : a.ref_id < b.ref_id;
  });
  for (const auto& r : found) {
    if (out.recognized.size() >= cfg.max_objects) break;
    if (std::none_of(out.recognized.begin(), out.recognized.end(),
                     [&](const Recognition& o) { return o.ref_id == r.ref_id; }))
      out.recognized.push_back(r);
  }
  return out;
}

RecognitionOutcome recognize_request(const retrieval::ReferenceIndex& index, const net::RecognitionRequest& req,
                                     const RecognizeConfig& cfg) {
  const auto t0 = Clock::now();
  const ImageGray8 frame = net::decode_frame(req);
  const double parse = ms_between(t0, Clock::now());
  RecognitionOutcome out = recognize_frame(index, frame, cfg);
  out.cycle_id = req.cycle_id;
  out.timings.parse_ms = parse;
  return out;
}

std::uint16_t ObjectIds::id_for(std::uint32_t ref_id) {
  auto [it, inserted] = ids_.try_emplace(ref_id, static_cast<std::uint16_t>(ids_.size() + 1));
  return it->second;
}

net::ResultMessage make_result(const RecognitionOutcome& outcome, std::uint32_t client_nonce, ObjectIds& ids) {
  net::ResultMessage res;
  res.client_nonce = client_nonce;
  res.cycle_id = outcome.cycle_id;
  for (const auto& r : outcome.recognized) {
    net::RecognizedObject obj;
    obj.object_id = ids.id_for(r.ref_id);
    obj.ref_id = r.ref_id;
    for (std::size_t i = 0; i < 4; ++i) {
      obj.corners[2 * i] = static_cast<float>(r.corners[i].x);
      obj.corners[2 * i + 1] = static_cast<float>(r.corners[i].y);
    }
    res.objects.push_back(obj);
  }
  return res;
}

}  // namespace mlens::server
