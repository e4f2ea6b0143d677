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

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "mlens/common/random.hpp"
#include "mlens/img/image.hpp"
#include "mlens/img/ops.hpp"

namespace mlens::testing {

inline ImageGray8 random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  ImageGray8 img(w, h);
  for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

/// Smooth random texture with strong local structure, suitable for corner
/// detection and optical flow.
inline ImageGray8 textured_image(int w, int h, std::uint64_t seed, double sigma = 2.0) {
  Rng rng(seed);
  ImageF32 noise(w, h);
  for (auto& v : noise.pixels()) v = static_cast<float>(rng.uniform(0.0, 255.0));
  ImageF32 smooth = gaussian_blur(noise, sigma);
  float lo = 1e9f, hi = -1e9f;
  for (float v : smooth.pixels()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  ImageGray8 out(w, h);
  auto src = smooth.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<std::uint8_t>(std::lround(20.0 + 215.0 * (src[i] - lo) / std::max(1e-6f, hi - lo)));
  }
  return out;
}

/// Integer shift: out(x, y) = in(x - dx, y - dy), uncovered pixels replicated.
inline ImageGray8 shifted(const ImageGray8& in, int dx, int dy) {
  ImageGray8 out(in.width(), in.height());
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x) out.at(x, y) = in.clamped(x - dx, y - dy);
  return out;
}

}  // namespace mlens::testing
