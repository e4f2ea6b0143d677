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
#include <string>
#include <vector>

#include "mlens/geom/homography.hpp"
#include "mlens/geom/polygon.hpp"
#include "mlens/img/image.hpp"

namespace mlens::harness {

/// Procedural poster: gradient base, multi-octave texture, random shapes and
/// glyph rows. Distinct seeds give visually unrelated posters.
ImageGray8 make_poster(std::uint64_t seed, int width, int height);

/// Poster with a seed-derived size in [min_side, max_side] on both axes.
ImageGray8 make_sized_poster(std::uint64_t seed, int min_side = 280, int max_side = 400);

/// Photo-like frame: 1/f texture background with a few posters on it, used
/// as a stand-in for natural camera content.
ImageGray8 make_natural_frame(std::uint64_t seed, int width = 640, int height = 360);

/// Corners of a width x height reference in its own pixel coordinates
/// (pixel-centre convention: the outer edge sits half a pixel out).
Quad reference_corners(int width, int height);

enum class ScriptKind { Static, FastMove, Rotate, Scale, Tilt, Composite };

std::string to_string(ScriptKind kind);
/// Throws InvalidArgument for unknown names.
ScriptKind parse_script_kind(const std::string& name);

/// A reference placed in the scene at frame 0.
struct Placement {
  std::size_t reference = 0;  ///< index into the reference list
  Homography to_frame;        ///< reference pixels -> frame pixels at frame 0
};

struct MotionScript {
  ScriptKind kind = ScriptKind::Static;
  int duration = 150;
  std::vector<Placement> placements;
  /// Per frame, per placement: reference pixels -> frame pixels.
  std::vector<std::vector<Homography>> homographies;
};

struct ScriptParams {
  int width = 640;
  int height = 360;
  int duration = 150;
  double focal_px = 500.0;
  double move_px_per_frame = 8.0;
  double move_amplitude_px = 96.0;
  double rotate_to_deg = 90.0;
  double scale_to = 2.0;
  double tilt_to_deg = 40.0;
};

/// Camera-motion homography (frame -> frame) of the default scripts at
/// frame t, applied on top of the frame-0 placement.
Homography script_motion(ScriptKind kind, int t, const ScriptParams& p);

/// Builds the per-frame ground truth for the given placements. Composite
/// chains the four default motions.
MotionScript make_script(ScriptKind kind, std::vector<Placement> placements, const ScriptParams& p = {});

/// Centres a reference in the frame with its height set to `target_height`.
Placement centered_placement(std::size_t reference, int ref_width, int ref_height, int frame_width, int frame_height,
                             double target_height);

struct Sequence {
  std::vector<ImageGray8> frames;
  /// truth[t][k] = corners of placement k at frame t.
  std::vector<std::vector<Quad>> truth;
};

struct RenderOptions {
  int width = 640;
  int height = 360;
  std::uint8_t background = 128;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 7;
  /// Replaces the flat background when set; must match width x height.
  const ImageGray8* backdrop = nullptr;
};

/// Renders references warped into a frame over a flat background. Sampling
/// blends the two reference pyramid levels around the local minification so
/// shrunken posters do not alias; edges are coverage-blended.
class SceneRenderer {
 public:
  explicit SceneRenderer(const std::vector<ImageGray8>& references);

  /// `to_frame[k]` places reference `which[k]`.
  ImageGray8 render(const std::vector<std::size_t>& which, const std::vector<Homography>& to_frame,
                    const RenderOptions& opt, std::uint64_t frame_seed = 0) const;

 private:
  std::vector<std::vector<ImageGray8>> pyramids_;
};

/// Throws InvalidScript when some placement is never inside the frame.
Sequence generate_sequence(const std::vector<ImageGray8>& references, const MotionScript& script,
                           const RenderOptions& opt = {});

/// Ground truth only, without rendering.
std::vector<std::vector<Quad>> script_truth(const std::vector<ImageGray8>& references, const MotionScript& script);

}  // namespace mlens::harness
