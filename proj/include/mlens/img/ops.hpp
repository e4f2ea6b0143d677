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

#include "mlens/img/image.hpp"

namespace mlens {

/// Block-mean downscale; each output pixel is the rounded-half-up mean of a
/// factor x factor block. Trailing rows/columns that do not fill a block are
/// dropped.
ImageGray8 downsample(const ImageGray8& img, int factor);

/// Separable Gaussian blur, radius ceil(3 sigma), replicated border.
ImageGray8 gaussian_blur(const ImageGray8& img, double sigma);

/// Same filter on a float raster (no rounding).
ImageF32 gaussian_blur(const ImageF32& img, double sigma);

ImageF32 to_float(const ImageGray8& img);
ImageGray8 to_gray8(const ImageF32& img);

template <typename T>
Image<T> transpose(const Image<T>& img) {
  Image<T> out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.at(y, x) = img.at(x, y);
  return out;
}

/// Bilinear sample with replicated border.
float sample_bilinear(const ImageGray8& img, double x, double y);
float sample_bilinear(const ImageF32& img, double x, double y);

/// Bilinear resize to an exact size (pixel-centre aligned).
ImageGray8 resize(const ImageGray8& img, int width, int height);

/// Inverse-mapped warp: out(x, y) = src(dst_to_src(x, y)). Pixels mapping
/// outside the source get `fill`.
ImageGray8 warp_perspective(const ImageGray8& src, const std::array<double, 9>& dst_to_src, int width, int height,
                            std::uint8_t fill = 0);

/// ITU-R BT.601 luma from interleaved 8-bit channels (1, 2, 3 or 4 channels;
/// alpha ignored).
ImageGray8 luma_from_interleaved(int width, int height, int channels, std::span<const std::uint8_t> data);

}  // namespace mlens
