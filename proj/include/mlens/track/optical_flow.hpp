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

struct FlowConfig {
  int levels = 3;  ///< pyramid levels including the full-resolution one
  int window = 21;
  int max_iterations = 30;
  double epsilon = 0.01;
  /// Mean minimum eigenvalue of the gradient matrix (intensity^2 / px^2)
  /// below which a window is considered textureless.
  double min_eigen = 0.1;
  /// Mean absolute residual (intensity levels) above which a track is lost.
  double max_residual = 24.0;
};

/// Image pyramid with Scharr gradients, built once per frame and reused as
/// the "previous" side of the next flow call.
class FlowPyramid {
 public:
  FlowPyramid() = default;
  FlowPyramid(const ImageGray8& img, int levels);

  int levels() const { return static_cast<int>(images_.size()); }
  int width() const { return images_.empty() ? 0 : images_[0].width(); }
  int height() const { return images_.empty() ? 0 : images_[0].height(); }
  const ImageF32& image(int level) const { return images_[static_cast<std::size_t>(level)]; }
  const ImageF32& grad_x(int level) const { return gx_[static_cast<std::size_t>(level)]; }
  const ImageF32& grad_y(int level) const { return gy_[static_cast<std::size_t>(level)]; }

 private:
  std::vector<ImageF32> images_, gx_, gy_;
};

struct FlowResult {
  std::vector<Point2> new_points;
  std::vector<std::uint8_t> status;  ///< 1 tracked, 0 lost
  std::vector<float> residual;       ///< mean absolute residual at full resolution
};

/// Iterative pyramidal Lucas-Kanade. A point is lost when it leaves the
/// frame, its gradient matrix is near-singular, or the final residual is too
/// large.
FlowResult track_optical_flow(const FlowPyramid& prev, const FlowPyramid& next, std::span<const Point2> pts,
                              const FlowConfig& cfg = {});

FlowResult track_optical_flow(const ImageGray8& prev, const ImageGray8& next, std::span<const Point2> pts,
                              const FlowConfig& cfg = {});

}  // namespace mlens
