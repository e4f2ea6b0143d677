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
#include <cmath>
#include <numeric>
#include <vector>

#include "mlens/track/features.hpp"

namespace mlens {

std::size_t FeatureSet::live_count() const {
  return static_cast<std::size_t>(std::count_if(bitmap.begin(), bitmap.end(), [](GroupLabel l) { return l != kLostLabel; }));
}

std::vector<Point2> detect_corners(const ImageGray8& img, int max_count, double quality, double min_distance) {
  require(max_count >= 1, ErrorCode::InvalidArgument, "max_count must be >= 1");
  require(quality > 0.0 && quality <= 1.0, ErrorCode::InvalidArgument, "quality must be in (0, 1]");
  const int w = img.width(), h = img.height();
  if (w < 5 || h < 5) return {};

  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<float> ixx(n), ixy(n), iyy(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto p = [&](int dx, int dy) { return static_cast<float>(img.clamped(x + dx, y + dy)); };
      const float gx = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
      const float gy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      ixx[i] = gx * gx;
      ixy[i] = gx * gy;
      iyy[i] = gy * gy;
    }
  }

  std::vector<float> resp(n, 0.f);
  float max_resp = 0.f;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      float a = 0, b = 0, c = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const std::size_t j = static_cast<std::size_t>(y + dy) * w + (x + dx);
          a += ixx[j];
          b += ixy[j];
          c += iyy[j];
        }
      const float half_tr = 0.5f * (a + c);
      const float disc = std::sqrt(0.25f * (a - c) * (a - c) + b * b);
      const float r = half_tr - disc;
      resp[static_cast<std::size_t>(y) * w + x] = r;
      max_resp = std::max(max_resp, r);
    }
  }
  if (max_resp <= 0.f) return {};
  const float thresh = static_cast<float>(quality) * max_resp;

  struct Candidate {
    float r;
    int x, y;
  };
  std::vector<Candidate> cands;
  for (int y = 2; y < h - 2; ++y) {
    for (int x = 2; x < w - 2; ++x) {
      const float r = resp[static_cast<std::size_t>(y) * w + x];
      if (r < thresh) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if ((dx || dy) && resp[static_cast<std::size_t>(y + dy) * w + (x + dx)] > r) {
            is_max = false;
            break;
          }
      if (is_max) cands.push_back({r, x, y});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.r > b.r; });

  std::vector<Point2> out;
  const double md2 = min_distance * min_distance;
  const double cell = std::max(1.0, min_distance);
  const int gw = static_cast<int>(w / cell) + 1, gh = static_cast<int>(h / cell) + 1;
  std::vector<std::vector<Point2>> grid(static_cast<std::size_t>(gw) * gh);
  for (const auto& c : cands) {
    const Point2 p{static_cast<double>(c.x), static_cast<double>(c.y)};
    const int cx = static_cast<int>(c.x / cell), cy = static_cast<int>(c.y / cell);
    bool ok = true;
    if (min_distance > 0) {
      for (int gy = std::max(0, cy - 1); gy <= std::min(gh - 1, cy + 1) && ok; ++gy)
        for (int gx = std::max(0, cx - 1); gx <= std::min(gw - 1, cx + 1) && ok; ++gx)
          for (const auto& q : grid[static_cast<std::size_t>(gy) * gw + gx]) {
            const double dx = q.x - p.x, dy = q.y - p.y;
            if (dx * dx + dy * dy < md2) {
              ok = false;
              break;
            }
          }
    }
    if (!ok) continue;
    grid[static_cast<std::size_t>(cy) * gw + cx].push_back(p);
    out.push_back(p);
    if (static_cast<int>(out.size()) >= max_count) break;
  }
  return out;
}

}  // namespace mlens
