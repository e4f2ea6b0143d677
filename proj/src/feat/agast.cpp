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

#include "mlens/feat/features.hpp"
#include "mlens/img/ops.hpp"

namespace mlens::feat {
namespace {

constexpr std::array<std::array<int, 2>, 16> kCircle{{{0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1},
                                                      {2, 2}, {1, 3}, {0, 3}, {-1, 3}, {-2, 2}, {-3, 1},
                                                      {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}}};
constexpr int kArc = 9;

int arc_score(const int* d) {
  // Largest over arc starts of the smallest contrast along the arc, for the
  // brighter and the darker case.
  int best = 0;
  for (int k = 0; k < 16; ++k) {
    int lo_b = 1 << 20, lo_d = 1 << 20;
    for (int j = 0; j < kArc; ++j) {
      const int v = d[(k + j) & 15];
      lo_b = std::min(lo_b, v);
      lo_d = std::min(lo_d, -v);
    }
    best = std::max({best, lo_b, lo_d});
  }
  return best;
}

void detect_octave(const ImageGray8& img, int threshold, int octave, std::vector<Keypoint>& out) {
  const int w = img.width(), h = img.height();
  if (w < 7 || h < 7) return;
  std::array<int, 16> offsets;
  for (int k = 0; k < 16; ++k) offsets[k] = kCircle[k][1] * w + kCircle[k][0];
  std::vector<int> score(static_cast<std::size_t>(w) * h, 0);
  const std::uint8_t* base = img.row(0);
  for (int y = 3; y < h - 3; ++y) {
    for (int x = 3; x < w - 3; ++x) {
      const std::uint8_t* p = base + static_cast<std::ptrdiff_t>(y) * w + x;
      const int c = *p;
      // Any 9-arc covers at least two of the four compass pixels.
      int bright = 0, dark = 0;
      for (int k = 0; k < 16; k += 4) {
        const int v = p[offsets[k]];
        bright += v > c + threshold;
        dark += v < c - threshold;
      }
      if (bright < 2 && dark < 2) continue;
      int d[16];
      for (int k = 0; k < 16; ++k) d[k] = p[offsets[k]] - c;
      const int s = arc_score(d);
      if (s > threshold) score[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
  const double f = static_cast<double>(1 << octave);
  for (int y = 3; y < h - 3; ++y) {
    for (int x = 3; x < w - 3; ++x) {
      const int s = score[static_cast<std::size_t>(y) * w + x];
      if (s == 0) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int n = score[static_cast<std::size_t>(y + dy) * w + (x + dx)];
          // Ties go to the pixel scanned first.
          const bool before = dy < 0 || (dy == 0 && dx < 0);
          if (n > s || (before && n == s)) {
            is_max = false;
            break;
          }
        }
      if (!is_max) continue;
      // Sub-pixel peak of the unthresholded score along each axis; on coarse
      // octaves the shift would be magnified beyond what the score supports.
      auto raw = [&](int xx, int yy) {
        const std::uint8_t* q = base + static_cast<std::ptrdiff_t>(yy) * w + xx;
        int d[16];
        for (int k = 0; k < 16; ++k) d[k] = q[offsets[k]] - *q;
        return static_cast<double>(arc_score(d));
      };
      auto peak = [](double lo, double mid, double hi) {
        const double curv = lo - 2 * mid + hi;
        return curv < 0 ? std::clamp(0.5 * (lo - hi) / curv, -0.5, 0.5) : 0.0;
      };
      const bool refine = octave <= 1;
      const double sx = refine && x > 3 && x < w - 4 ? peak(raw(x - 1, y), s, raw(x + 1, y)) : 0.0;
      const double sy = refine && y > 3 && y < h - 4 ? peak(raw(x, y - 1), s, raw(x, y + 1)) : 0.0;
      out.push_back(Keypoint{{(x + sx + 0.5) * f - 0.5, (y + sy + 0.5) * f - 0.5}, octave, static_cast<float>(s)});
    }
  }
}

}  // namespace

int segment_test_score(const ImageGray8& img, int x, int y) {
  if (x < 3 || y < 3 || x >= img.width() - 3 || y >= img.height() - 3) return 0;
  const int c = img.at(x, y);
  int d[16];
  for (int k = 0; k < 16; ++k) d[k] = img.at(x + kCircle[k][0], y + kCircle[k][1]) - c;
  return arc_score(d);
}

std::vector<Keypoint> detect_agast(const ImageGray8& img, const AgastConfig& cfg) {
  require(img.width() >= 48 && img.height() >= 48, ErrorCode::InvalidArgument,
          "keypoint detection needs at least 48x48 pixels");
  require(cfg.octaves >= 1 && cfg.max_keypoints >= 1 && cfg.threshold >= 0, ErrorCode::InvalidArgument,
          "invalid detector configuration");
  std::vector<Keypoint> kps;
  ImageGray8 level = img;
  for (int o = 0; o < cfg.octaves; ++o) {
    if (o > 0) {
      if (level.width() < 14 || level.height() < 14) break;
      level = downsample(level, 2);
    }
    detect_octave(level, cfg.threshold, o, kps);
  }
  std::stable_sort(kps.begin(), kps.end(), [](const Keypoint& a, const Keypoint& b) { return a.score > b.score; });
  if (kps.size() > static_cast<std::size_t>(cfg.max_keypoints)) kps.resize(static_cast<std::size_t>(cfg.max_keypoints));
  return kps;
}

}  // namespace mlens::feat
