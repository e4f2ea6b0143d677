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
#include <span>
#include <vector>

#include "mlens/img/image.hpp"

namespace mlens {

/// Bitmap label of a feature point.
using GroupLabel = std::int32_t;
inline constexpr GroupLabel kLostLabel = 0;
/// Tracked but not yet attributed to any object.
inline constexpr GroupLabel kUnassignedLabel = -1;

struct FeatureSet {
  std::uint64_t generation = 0;
  std::vector<Point2> points;
  std::vector<GroupLabel> bitmap;
  /// Point count at extraction time; the low-count trigger compares against it.
  std::size_t initial_count = 0;

  std::size_t live_count() const;
};

struct CornerConfig {
  int max_count = 180;
  double quality = 0.01;
  double min_distance = 10.0;
};

/// Shi-Tomasi minimum-eigenvalue corners: 3x3 Sobel gradients, 3x3 structure
/// tensor window, 3x3 non-maximum suppression, quality threshold relative to
/// the strongest response, then greedy selection by descending response with
/// min_distance spacing.
std::vector<Point2> detect_corners(const ImageGray8& img, int max_count, double quality, double min_distance);

inline std::vector<Point2> detect_corners(const ImageGray8& img, const CornerConfig& cfg) {
  return detect_corners(img, cfg.max_count, cfg.quality, cfg.min_distance);
}

}  // namespace mlens
