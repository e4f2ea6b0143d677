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

#include "mlens/geom/homography.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "mlens/common/error.hpp"

namespace mlens {

double Homography::determinant() const {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) + m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Homography Homography::inverse() const {
  const double det = determinant();
  require(std::fabs(det) > 1e-300, ErrorCode::DegenerateHomography, "singular homography");
  Homography r;
  r.m = {(m[4] * m[8] - m[5] * m[7]) / det, (m[2] * m[7] - m[1] * m[8]) / det, (m[1] * m[5] - m[2] * m[4]) / det,
         (m[5] * m[6] - m[3] * m[8]) / det, (m[0] * m[8] - m[2] * m[6]) / det, (m[2] * m[3] - m[0] * m[5]) / det,
         (m[3] * m[7] - m[4] * m[6]) / det, (m[1] * m[6] - m[0] * m[7]) / det, (m[0] * m[4] - m[1] * m[3]) / det};
  return r.normalized();
}

Homography Homography::normalized() const {
  Homography r = *this;
  double s = m[8];
  if (std::fabs(s) < 1e-12) {
    double n = 0.0;
    for (double v : m) n += v * v;
    s = std::sqrt(n);
  }
  if (s == 0.0) return r;
  for (double& v : r.m) v /= s;
  return r;
}

Homography operator*(const Homography& a, const Homography& b) {
  Homography r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a.m[static_cast<std::size_t>(3 * i + k)] * b.m[static_cast<std::size_t>(3 * k + j)];
      r.m[static_cast<std::size_t>(3 * i + j)] = s;
    }
  return r.normalized();
}

Point2 apply_homography(const Homography& h, const Point2& p) {
  const auto& m = h.m;
  const double w = m[6] * p.x + m[7] * p.y + m[8];
  if (std::fabs(w) < 1e-12) fail(ErrorCode::PointAtInfinity, "point maps to infinity");
  return {(m[0] * p.x + m[1] * p.y + m[2]) / w, (m[3] * p.x + m[4] * p.y + m[5]) / w};
}

std::vector<Point2> apply_homography(const Homography& h, std::span<const Point2> pts) {
  std::vector<Point2> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(apply_homography(h, p));
  return out;
}

namespace {

struct Normalizer {
  double cx = 0, cy = 0, s = 1;

  static Normalizer of(std::span<const Point2> pts) {
    Normalizer n;
    for (const auto& p : pts) {
      n.cx += p.x;
      n.cy += p.y;
    }
    n.cx /= static_cast<double>(pts.size());
    n.cy /= static_cast<double>(pts.size());
    double d = 0.0;
    for (const auto& p : pts) d += std::hypot(p.x - n.cx, p.y - n.cy);
    d /= static_cast<double>(pts.size());
    n.s = d > 1e-12 ? std::sqrt(2.0) / d : 1.0;
    return n;
  }

  Homography matrix() const { return {{s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1}}; }
};

Homography dlt(std::span<const Point2> src, std::span<const Point2> dst) {
  const auto ns = Normalizer::of(src);
  const auto nd = Normalizer::of(dst);
  Eigen::Matrix<double, 9, 9> ata = Eigen::Matrix<double, 9, 9>::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double x = (src[i].x - ns.cx) * ns.s, y = (src[i].y - ns.cy) * ns.s;
    const double u = (dst[i].x - nd.cx) * nd.s, v = (dst[i].y - nd.cy) * nd.s;
    Eigen::Matrix<double, 9, 1> r1, r2;
    r1 << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    r2 << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    ata.noalias() += r1 * r1.transpose();
    ata.noalias() += r2 * r2.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> es(ata);
  const Eigen::Matrix<double, 9, 1> v = es.eigenvectors().col(0);
  Homography hn;
  for (int i = 0; i < 9; ++i) hn.m[static_cast<std::size_t>(i)] = v(i);
  // H = Td^-1 * Hn * Ts
  return (nd.matrix().inverse() * hn * ns.matrix()).normalized();
}

double sq_error(const Homography& h, const Point2& s, const Point2& d) {
  const auto& m = h.m;
  const double w = m[6] * s.x + m[7] * s.y + m[8];
  if (std::fabs(w) < 1e-12) return std::numeric_limits<double>::infinity();
  const double u = (m[0] * s.x + m[1] * s.y + m[2]) / w - d.x;
  const double v = (m[3] * s.x + m[4] * s.y + m[5]) / w - d.y;
  return u * u + v * v;
}

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Rejects minimal samples with (near-)collinear triples or whose triangle
// orientations disagree between the two views (such samples cannot come from
// a valid orientation-preserving homography).
bool sample_ok(const std::array<Point2, 4>& s, const std::array<Point2, 4>& d) {
  static constexpr int tri[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  for (const auto& t : tri) {
    const double cs = cross(s[static_cast<std::size_t>(t[0])], s[static_cast<std::size_t>(t[1])], s[static_cast<std::size_t>(t[2])]);
    const double cd = cross(d[static_cast<std::size_t>(t[0])], d[static_cast<std::size_t>(t[1])], d[static_cast<std::size_t>(t[2])]);
    if (std::fabs(cs) < 1e-6 || std::fabs(cd) < 1e-6) return false;
    if ((cs > 0) != (cd > 0)) return false;
  }
  return true;
}

int score(const Homography& h, std::span<const Point2> src, std::span<const Point2> dst, double thr2,
          std::vector<std::uint8_t>& mask, double& err_sum) {
  int count = 0;
  err_sum = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double e = sq_error(h, src[i], dst[i]);
    const bool in = e <= thr2;
    mask[i] = in ? 1 : 0;
    if (in) {
      ++count;
      err_sum += e;
    }
  }
  return count;
}

}  // namespace

Homography fit_homography_dlt(std::span<const Point2> src, std::span<const Point2> dst) {
  require(src.size() == dst.size(), ErrorCode::InvalidArgument, "correspondence lists differ in length");
  require(src.size() >= 4, ErrorCode::InsufficientCorrespondences, "need at least 4 correspondences");
  return dlt(src, dst);
}

RansacResult estimate_homography_ransac(std::span<const Point2> src, std::span<const Point2> dst,
                                        const RansacConfig& cfg, Rng& rng) {
  require(src.size() == dst.size(), ErrorCode::InvalidArgument, "correspondence lists differ in length");
  require(src.size() >= 4, ErrorCode::InsufficientCorrespondences, "need at least 4 correspondences");
  const std::size_t n = src.size();
  const int required = std::max(4, std::min(cfg.min_inliers, static_cast<int>(n)));
  const double thr2 = cfg.threshold_px * cfg.threshold_px;

  RansacResult best;
  best.inlier_mask.assign(n, 0);
  double best_err = std::numeric_limits<double>::infinity();
  std::vector<std::uint8_t> mask(n, 0);

  int iterations = cfg.max_iterations;
  std::array<Point2, 4> s{}, d{};
  for (int it = 0; it < iterations; ++it) {
    std::array<std::size_t, 4> idx{};
    for (int k = 0; k < 4; ++k) {
      bool fresh;
      do {
        idx[static_cast<std::size_t>(k)] = static_cast<std::size_t>(rng.below(n));
        fresh = std::find(idx.begin(), idx.begin() + k, idx[static_cast<std::size_t>(k)]) == idx.begin() + k;
      } while (!fresh);
      s[static_cast<std::size_t>(k)] = src[idx[static_cast<std::size_t>(k)]];
      d[static_cast<std::size_t>(k)] = dst[idx[static_cast<std::size_t>(k)]];
    }
    if (n > 4 && !sample_ok(s, d)) continue;
    const Homography h = dlt(s, d);
    if (std::fabs(h.determinant()) < 1e-12) continue;
    double err = 0.0;
    const int count = score(h, src, dst, thr2, mask, err);
    if (count > best.inlier_count || (count == best.inlier_count && err < best_err)) {
      best.inlier_count = count;
      best.h = h;
      best.inlier_mask = mask;
      best_err = err;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      if (w >= 1.0) break;
      const double denom = std::log(1.0 - std::pow(w, 4.0));
      if (denom < 0.0) {
        const double needed = std::log(1.0 - cfg.confidence) / denom;
        if (needed < iterations) iterations = std::max(it + 1, static_cast<int>(std::ceil(needed)));
      }
    }
  }
  if (best.inlier_count < required) {
    fail(ErrorCode::InsufficientCorrespondences, "consensus set too small");
  }

  // Refit on the consensus set until it stops growing.
  for (int round = 0; round < 4; ++round) {
    std::vector<Point2> is, id;
    for (std::size_t i = 0; i < n; ++i)
      if (best.inlier_mask[i]) {
        is.push_back(src[i]);
        id.push_back(dst[i]);
      }
    const Homography refit = dlt(is, id);
    double err = 0.0;
    const int count = score(refit, src, dst, thr2, mask, err);
    if (count < best.inlier_count) break;
    const bool grew = count > best.inlier_count;
    best.h = refit;
    best.inlier_mask = mask;
    best.inlier_count = count;
    if (!grew) break;
  }
  if (best.inlier_count < required) fail(ErrorCode::InsufficientCorrespondences, "consensus set too small");
  return best;
}

Homography estimate_rigid_update(std::span<const Point2> old_pts, std::span<const Point2> new_pts,
                                 const RansacConfig& cfg, Rng& rng) {
  return estimate_homography_ransac(old_pts, new_pts, cfg, rng).h;
}

double max_reprojection_error(const Homography& h, std::span<const Point2> src, std::span<const Point2> dst) {
  double worst = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) worst = std::max(worst, std::sqrt(sq_error(h, src[i], dst[i])));
  return worst;
}

}  // namespace mlens
