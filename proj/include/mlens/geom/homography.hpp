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
#include <span>
#include <vector>

#include "mlens/common/random.hpp"
#include "mlens/img/image.hpp"

namespace mlens {

/// 3x3 projective transform, row-major.
struct Homography {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Homography identity() { return {}; }
  static Homography translation(double tx, double ty) { return {{1, 0, tx, 0, 1, ty, 0, 0, 1}}; }
  static Homography scaling(double sx, double sy) { return {{sx, 0, 0, 0, sy, 0, 0, 0, 1}}; }

  double operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }

  double determinant() const;
  Homography inverse() const;
  /// Scales so m[8] == 1 (or unit Frobenius norm when m[8] vanishes).
  Homography normalized() const;

  friend Homography operator*(const Homography& a, const Homography& b);
};

/// Projective map with division by the third homogeneous coordinate.
/// Throws PointAtInfinity when that coordinate is within 1e-12 of zero.
Point2 apply_homography(const Homography& h, const Point2& p);

std::vector<Point2> apply_homography(const Homography& h, std::span<const Point2> pts);

/// Least-squares homography over all correspondences via Hartley-normalized
/// DLT. Needs at least 4 pairs.
Homography fit_homography_dlt(std::span<const Point2> src, std::span<const Point2> dst);

struct RansacConfig {
  double threshold_px = 3.0;
  int max_iterations = 500;
  double confidence = 0.995;
  int min_inliers = 8;
};

struct RansacResult {
  Homography h;
  std::vector<std::uint8_t> inlier_mask;
  int inlier_count = 0;
};

/// Robust fit: random 4-point minimal samples, consensus by reprojection
/// error, final normalized-DLT refit on the consensus set. The consensus set
/// must reach min(cfg.min_inliers, |src|) points.
RansacResult estimate_homography_ransac(std::span<const Point2> src, std::span<const Point2> dst,
                                        const RansacConfig& cfg, Rng& rng);

/// Frame-to-frame object motion from tracked point pairs of one group.
Homography estimate_rigid_update(std::span<const Point2> old_pts, std::span<const Point2> new_pts,
                                 const RansacConfig& cfg, Rng& rng);

/// Max reprojection error of h over the given pairs.
double max_reprojection_error(const Homography& h, std::span<const Point2> src, std::span<const Point2> dst);

}  // namespace mlens
