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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "mlens/feat/features.hpp"
#include "mlens/img/ops.hpp"
#include "mlens/simd/kernels.hpp"

namespace mlens::feat {
namespace {

#include "freak_pairs.inc"

constexpr int kPoints = 43;
constexpr double kPi = 3.14159265358979323846;

struct PatternPoint {
  double x, y, sigma;  // in units of the pattern scale
};

struct FieldPair {
  std::uint8_t i, j;
};

struct Pattern {
  std::array<PatternPoint, kPoints> points;
  std::array<FieldPair, 512> pairs;
  std::array<FieldPair, 45> orientation_pairs;
  double extent;  // max radius + sigma, in pattern-scale units
};

Pattern build_pattern() {
  Pattern p{};
  constexpr int ring_size[8] = {6, 6, 6, 6, 6, 6, 6, 1};
  const double big_r = 2.0 / 3.0, small_r = 2.0 / 24.0, unit = (big_r - small_r) / 21.0;
  const double radius[8] = {big_r, big_r - 6 * unit, big_r - 11 * unit, big_r - 15 * unit,
                            big_r - 18 * unit, big_r - 20 * unit, small_r, 0.0};
  const double sigma[8] = {radius[0] / 2, radius[1] / 2, radius[2] / 2, radius[3] / 2,
                           radius[4] / 2, radius[5] / 2, radius[6] / 2, radius[6] / 2};
  int k = 0;
  for (int ring = 0; ring < 8; ++ring) {
    // Odd rings are rotated by half a step so neighbouring rings interleave.
    const double beta = kPi / ring_size[ring] * (ring % 2);
    for (int j = 0; j < ring_size[ring]; ++j) {
      const double alpha = j * 2 * kPi / ring_size[ring] + beta;
      p.points[static_cast<std::size_t>(k++)] = {radius[ring] * std::cos(alpha), radius[ring] * std::sin(alpha),
                                                 sigma[ring]};
    }
  }
  p.extent = radius[0] + sigma[0];

  std::array<FieldPair, 903> all{};
  std::size_t n = 0;
  for (int i = 1; i < kPoints; ++i)
    for (int j = 0; j < i; ++j) all[n++] = {static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(j)};
  for (std::size_t b = 0; b < 512; ++b) p.pairs[b] = all[kSelectedPairs[b]];

  // Orientation: opposite and second-neighbour pairs on the four outer
  // rings, opposite pairs on the next three.
  std::size_t m = 0;
  for (int ring = 0; ring < 4; ++ring) {
    const int b0 = ring * 6;
    const int pairs[9][2] = {{0, 3}, {1, 4}, {2, 5}, {0, 2}, {1, 3}, {2, 4}, {3, 5}, {4, 0}, {5, 1}};
    for (const auto& pr : pairs)
      p.orientation_pairs[m++] = {static_cast<std::uint8_t>(b0 + pr[0]), static_cast<std::uint8_t>(b0 + pr[1])};
  }
  for (int ring = 4; ring < 7; ++ring) {
    const int b0 = ring * 6;
    for (int q = 0; q < 3; ++q)
      p.orientation_pairs[m++] = {static_cast<std::uint8_t>(b0 + q), static_cast<std::uint8_t>(b0 + q + 3)};
  }
  return p;
}

const Pattern& pattern() {
  static const Pattern p = build_pattern();
  return p;
}

class Integral {
 public:
  explicit Integral(const ImageGray8& img) : w_(img.width() + 1), h_(img.height() + 1), data_(static_cast<std::size_t>(w_) * h_, 0) {
    for (int y = 0; y < img.height(); ++y) {
      std::int64_t row = 0;
      for (int x = 0; x < img.width(); ++x) {
        row += img.at(x, y);
        at(x + 1, y + 1) = at(x + 1, y) + row;
      }
    }
  }

  /// Sum over [x0, x1) x [y0, y1).
  std::int64_t sum(int x0, int y0, int x1, int y1) const { return at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0); }

 private:
  std::int64_t& at(int x, int y) { return data_[static_cast<std::size_t>(y) * w_ + x]; }
  std::int64_t at(int x, int y) const { return data_[static_cast<std::size_t>(y) * w_ + x]; }

  int w_, h_;
  std::vector<std::int64_t> data_;
};

/// Rounded mean over a box of half-size `r` around (x, y); fixed-point
/// bilinear sample for tiny fields. Single precision throughout so box
/// edges round the same way as the reference implementation.
int field_mean(const ImageGray8& img, const Integral& ii, float x, float y, float r) {
  if (r < 0.5f) {
    const int xi = static_cast<int>(x), yi = static_cast<int>(y);
    const int rx = static_cast<int>((x - xi) * 1024), ry = static_cast<int>((y - yi) * 1024);
    const int rx1 = 1024 - rx, ry1 = 1024 - ry;
    const int xn = std::min(xi + 1, img.width() - 1), yn = std::min(yi + 1, img.height() - 1);
    const std::int64_t v = std::int64_t{rx1} * ry1 * img.at(xi, yi) + std::int64_t{rx} * ry1 * img.at(xn, yi) +
                           std::int64_t{rx1} * ry * img.at(xi, yn) + std::int64_t{rx} * ry * img.at(xn, yn);
    return static_cast<int>((v + 2 * 1024 * 512) / (1024 * 1024));
  }
  const int x0 = static_cast<int>(static_cast<double>(x - r) + 0.5);
  const int y0 = static_cast<int>(static_cast<double>(y - r) + 0.5);
  const int x1 = static_cast<int>(static_cast<double>(x + r) + 1.5);
  const int y1 = static_cast<int>(static_cast<double>(y + r) + 1.5);
  const std::int64_t area = static_cast<std::int64_t>(x1 - x0) * (y1 - y0);
  return static_cast<int>((ii.sum(x0, y0, x1, y1) + area / 2) / area);
}

constexpr int kOrientations = 256;

struct PlacedPoint {
  float x, y, sigma;
};

/// Pattern at pixel scale `s`, rotated by orientation bin `theta_idx`.
std::array<PlacedPoint, kPoints> place_pattern(double s, int theta_idx) {
  const Pattern& pat = pattern();
  const double theta = theta_idx * 2 * kPi / kOrientations;
  const double c = std::cos(theta), sn = std::sin(theta);
  std::array<PlacedPoint, kPoints> out;
  for (std::size_t k = 0; k < kPoints; ++k) {
    const auto& pp = pat.points[k];
    out[k] = {static_cast<float>((pp.x * c - pp.y * sn) * s), static_cast<float>((pp.x * sn + pp.y * c) * s),
              static_cast<float>(pp.sigma * s)};
  }
  return out;
}

/// Integer orientation weights, fixed point 1/4096, from the octave-0
/// pattern.
struct OrientationWeights {
  std::array<int, 45> dx, dy;
};

OrientationWeights orientation_weights(double s0) {
  const auto pts = place_pattern(s0, 0);
  OrientationWeights w{};
  const auto& pairs = pattern().orientation_pairs;
  for (std::size_t m = 0; m < pairs.size(); ++m) {
    const float dx = pts[pairs[m].i].x - pts[pairs[m].j].x;
    const float dy = pts[pairs[m].i].y - pts[pairs[m].j].y;
    const float norm_sq = dx * dx + dy * dy;
    w.dx[m] = static_cast<int>(dx / norm_sq * 4096.0 + 0.5);
    w.dy[m] = static_cast<int>(dy / norm_sq * 4096.0 + 0.5);
  }
  return w;
}

}  // namespace

double freak_support_radius(int octave, const FreakConfig& cfg) {
  return std::ceil(pattern().extent * cfg.pattern_scale * std::ldexp(1.0, octave)) + 1.0;
}

FreakResult extract_freak(const ImageGray8& img, std::span<const Keypoint> keypoints, const FreakConfig& cfg) {
  const Pattern& pat = pattern();
  const Integral ii(img);
  const OrientationWeights weights = orientation_weights(cfg.pattern_scale);
  FreakResult res;
  res.descriptors.reserve(keypoints.size());
  std::array<int, kPoints> values;

  for (const Keypoint& kp : keypoints) {
    const double s = cfg.pattern_scale * std::ldexp(1.0, kp.octave);
    const double support = freak_support_radius(kp.octave, cfg);
    if (kp.pt.x <= support || kp.pt.y <= support || kp.pt.x >= img.width() - support ||
        kp.pt.y >= img.height() - support) {
      ++res.dropped;
      continue;
    }
    const float kx = static_cast<float>(kp.pt.x), ky = static_cast<float>(kp.pt.y);
    auto sample = [&](int theta_idx) {
      const auto pts = place_pattern(s, theta_idx);
      for (std::size_t k = 0; k < kPoints; ++k)
        values[k] = field_mean(img, ii, kx + pts[k].x, ky + pts[k].y, pts[k].sigma);
    };

    int theta_idx = 0;
    if (cfg.orientation_normalized) {
      sample(0);
      int gx = 0, gy = 0;
      for (std::size_t m = 0; m < pat.orientation_pairs.size(); ++m) {
        const int delta = values[pat.orientation_pairs[m].i] - values[pat.orientation_pairs[m].j];
        gx += delta * weights.dx[m] / 2048;
        gy += delta * weights.dy[m] / 2048;
      }
      float deg = static_cast<float>(std::atan2(static_cast<float>(gy), static_cast<float>(gx)) * (180.0 / kPi));
      if (deg < 0.f) deg += 360.f;
      theta_idx = static_cast<int>(kOrientations * deg * (1 / 360.0) + 0.5);
      if (theta_idx >= kOrientations) theta_idx -= kOrientations;
    }
    sample(theta_idx);

    Descriptor512 d;
    d.keypoint = kp.pt;
    d.octave = kp.octave;
    d.orientation = static_cast<float>(theta_idx * 2 * kPi / kOrientations);
    for (std::size_t b = 0; b < 512; ++b) {
      const auto& pr = pat.pairs[b];
      if (values[pr.i] >= values[pr.j]) d.bits[b >> 6] |= std::uint64_t{1} << (b & 63);
    }
    res.descriptors.push_back(d);
  }
  return res;
}

std::uint32_t hamming(const Descriptor512& a, const Descriptor512& b) {
  return simd::kernels().hamming512(a.bits.data(), b.bits.data());
}

}  // namespace mlens::feat
