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

#include "mlens/geom/pose.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "mlens/common/error.hpp"

namespace mlens {

Pose6DoF homography_to_pose(const Homography& h, const Intrinsics& k, double reference_width) {
  require(k.fx > 0 && k.fy > 0, ErrorCode::InvalidArgument, "focal lengths must be positive");
  require(reference_width > 0, ErrorCode::InvalidArgument, "reference width must be positive");
  Eigen::Matrix3d hm;
  hm << h.m[0], h.m[1], h.m[2], h.m[3], h.m[4], h.m[5], h.m[6], h.m[7], h.m[8];
  // Re-express the plane in reference-width units.
  hm.col(0) *= reference_width;
  hm.col(1) *= reference_width;
  Eigen::Matrix3d kinv;
  kinv << 1.0 / k.fx, 0, -k.cx / k.fx, 0, 1.0 / k.fy, -k.cy / k.fy, 0, 0, 1;
  Eigen::Matrix3d a = kinv * hm;

  const double n1 = a.col(0).norm();
  const double n2 = a.col(1).norm();
  const double scale_ref = std::max(n1, n2);
  if (scale_ref < 1e-12 || std::min(n1, n2) < 1e-9 * scale_ref) {
    fail(ErrorCode::DegenerateHomography, "vanishing homography column");
  }
  if (scale_ref / std::min(n1, n2) - 1.0 > 0.5) {
    fail(ErrorCode::DegenerateHomography, "homography columns differ too much in length");
  }
  double lambda = 2.0 / (n1 + n2);
  // The plane must lie in front of the camera.
  if (a(2, 2) * lambda < 0) lambda = -lambda;

  Eigen::Vector3d r1 = a.col(0) * lambda;
  Eigen::Vector3d r2 = a.col(1) * lambda;
  Eigen::Vector3d r3 = r1.cross(r2);
  Eigen::Matrix3d r;
  r << r1, r2, r3;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d rot = svd.matrixU() * svd.matrixV().transpose();
  if (rot.determinant() < 0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    rot = u * svd.matrixV().transpose();
  }
  const Eigen::Vector3d t = a.col(2) * lambda;

  Pose6DoF pose;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) pose.rotation[static_cast<std::size_t>(3 * i + j)] = rot(i, j);
    pose.translation[static_cast<std::size_t>(i)] = t(i);
  }
  return pose;
}

Homography pose_to_homography(const Pose6DoF& pose, const Intrinsics& k) {
  const auto& r = pose.rotation;
  const auto& t = pose.translation;
  Eigen::Matrix3d km;
  km << k.fx, 0, k.cx, 0, k.fy, k.cy, 0, 0, 1;
  Eigen::Matrix3d p;
  p << r[0], r[1], t[0], r[3], r[4], t[1], r[6], r[7], t[2];
  const Eigen::Matrix3d hm = km * p;
  Homography h;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) h.m[static_cast<std::size_t>(3 * i + j)] = hm(i, j);
  return h.normalized();
}

}  // namespace mlens
