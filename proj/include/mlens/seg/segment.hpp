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

#include <vector>

#include "mlens/geom/homography.hpp"
#include "mlens/geom/polygon.hpp"
#include "mlens/img/image.hpp"

namespace mlens::seg {

struct SegConfig {
  double sigma = 1.5;
  int window = 16;
  int stride = 8;
  double var_threshold = 100.0;  ///< intensity^2
  int morph_radius = 2;          ///< in variance-map cells
  double min_area_px = 2500.0;
  int patch_size = 400;
  double merge_iou = 0.3;
};

struct SegmentPatch {
  ImageGray8 image;               ///< patch_size x patch_size
  std::vector<Point2> polygon;    ///< convex outline in frame coordinates
  Quad bbox_corners{};            ///< enclosing quadrilateral, TL, TR, BR, BL
  int source_width = 0;
  int source_height = 0;
  Homography patch_to_frame;      ///< patch pixels -> frame pixels
};

/// Population variance of every window x window block on a stride grid.
/// Output is floor((dim - window) / stride) + 1 cells per axis.
ImageF32 variance_map(const ImageGray8& img, int window, int stride);

/// Binary erosion then dilation with a (2r+1)^2 square; cells outside the
/// map are ignored rather than treated as background.
std::vector<std::uint8_t> open_mask(const std::vector<std::uint8_t>& mask, int width, int height, int radius);

/// Dilation then erosion with the same element.
std::vector<std::uint8_t> close_mask(const std::vector<std::uint8_t>& mask, int width, int height, int radius);

/// Sets every background cell that is not 4-connected to the map border.
std::vector<std::uint8_t> fill_holes(const std::vector<std::uint8_t>& mask, int width, int height);

/// 8-connected component labels (0 = background, 1..n), returns n.
int label_components(const std::vector<std::uint8_t>& mask, int width, int height, std::vector<int>& labels);

/// Blur, variance map, threshold, then a closing and hole filling so poster
/// outlines become solid, then an opening that removes small clutter.
/// Components of the filled mask that survive the opening are outlined by
/// the convex hull of their window footprints, reduced to an enclosing
/// quadrilateral, merged when overlapping, and cropped.
std::vector<SegmentPatch> segment(const ImageGray8& frame, const SegConfig& cfg = {});

/// Patch covering the whole frame, for recognition without segmentation.
SegmentPatch whole_frame_patch(const ImageGray8& frame, int patch_size = 400);

/// Warps the quad of `frame` (TL, TR, BR, BL) to a size x size patch.
SegmentPatch crop_quad(const ImageGray8& frame, const Quad& quad, int size);

}  // namespace mlens::seg
