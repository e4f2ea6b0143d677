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

#include "mlens/geom/homography.hpp"

namespace mlens {

struct Intrinsics {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 0.0;
  double cy = 0.0;

  static Intrinsics for_frame(int width, int height, double focal = 500.0) {
    return {focal, focal, width / 2.0, height / 2.0};
  }
};

struct Pose6DoF {
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
  std::array<double, 3> translation{0, 0, 0};
};

/// Casts a plane-to-image homography into a rigid pose. `h` maps plane
/// coordinates in which the reference image is `reference_width` units wide;
/// translation comes out in reference-width units. Throws
/// DegenerateHomography when the first two columns of K^-1 H are not close to
/// equal length (ratio off by more than 0.5) or vanish.
Pose6DoF homography_to_pose(const Homography& h, const Intrinsics& k, double reference_width = 1.0);

/// Forward model: H = K [r1 r2 t] for a plane at z = 0.
Homography pose_to_homography(const Pose6DoF& pose, const Intrinsics& k);

}  // namespace mlens
