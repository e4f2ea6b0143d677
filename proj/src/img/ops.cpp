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

#include "mlens/img/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mlens/simd/kernels.hpp"

namespace mlens {

double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

ImageGray8 downsample(const ImageGray8& img, int factor) {
  require(factor >= 1, ErrorCode::InvalidArgument, "downsample factor must be >= 1");
  const int ow = img.width() / factor;
  const int oh = img.height() / factor;
  require(ow >= 1 && oh >= 1, ErrorCode::InvalidArgument, "downsample factor larger than image");
  if (factor == 1) return img;
  ImageGray8 out(ow, oh);
  const std::uint32_t n = static_cast<std::uint32_t>(factor * factor);
  std::vector<std::uint32_t> acc(static_cast<std::size_t>(ow));
  for (int oy = 0; oy < oh; ++oy) {
    std::fill(acc.begin(), acc.end(), 0u);
    for (int dy = 0; dy < factor; ++dy) {
      const std::uint8_t* src = img.row(oy * factor + dy);
      for (int ox = 0; ox < ow; ++ox) {
        std::uint32_t s = 0;
        for (int dx = 0; dx < factor; ++dx) s += src[ox * factor + dx];
        acc[static_cast<std::size_t>(ox)] += s;
      }
    }
    std::uint8_t* dst = out.row(oy);
    for (int ox = 0; ox < ow; ++ox) dst[ox] = static_cast<std::uint8_t>((acc[static_cast<std::size_t>(ox)] + n / 2) / n);
  }
  return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

// Fixed-point taps summing to exactly 2^kShift; the residual goes to the
// centre tap so the kernel stays symmetric.
constexpr int kShift = 14;

std::vector<std::int64_t> fixed_kernel(double sigma) {
  const auto k = gaussian_kernel(sigma);
  std::vector<std::int64_t> q(k.size());
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    q[i] = std::llround(k[i] * (1 << kShift));
    sum += q[i];
  }
  q[k.size() / 2] += (std::int64_t{1} << kShift) - sum;
  return q;
}

}  // namespace

ImageGray8 gaussian_blur(const ImageGray8& img, double sigma) {
  require(sigma > 0.0, ErrorCode::InvalidArgument, "blur sigma must be positive");
  const auto k = fixed_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width(), h = img.height();
  std::vector<std::int64_t> tmp(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* src = img.row(y);
    for (int x = 0; x < w; ++x) {
      std::int64_t s = 0;
      for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * src[std::clamp(x + i, 0, w - 1)];
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
  ImageGray8 out(w, h);
  const std::int64_t half = std::int64_t{1} << (2 * kShift - 1);
  std::vector<std::int64_t> acc(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    std::fill(acc.begin(), acc.end(), 0);
    for (int i = -r; i <= r; ++i) {
      const std::int64_t kv = k[static_cast<std::size_t>(i + r)];
      const std::int64_t* src = tmp.data() + static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w;
      for (int x = 0; x < w; ++x) acc[static_cast<std::size_t>(x)] += kv * src[x];
    }
    std::uint8_t* dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      const std::int64_t v = (acc[static_cast<std::size_t>(x)] + half) >> (2 * kShift);
      dst[x] = static_cast<std::uint8_t>(std::clamp<std::int64_t>(v, 0, 255));
    }
  }
  return out;
}

ImageF32 gaussian_blur(const ImageF32& img, double sigma) {
  require(sigma > 0.0, ErrorCode::InvalidArgument, "blur sigma must be positive");
  const auto kd = gaussian_kernel(sigma);
  std::vector<float> k(kd.begin(), kd.end());
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width(), h = img.height();
  const auto& kt = simd::kernels();

  ImageF32 tmp(w, h);
  std::vector<float> padded(static_cast<std::size_t>(w + 2 * r));
  for (int y = 0; y < h; ++y) {
    const float* src = img.row(y);
    for (int x = -r; x < w + r; ++x) padded[static_cast<std::size_t>(x + r)] = src[std::clamp(x, 0, w - 1)];
    kt.convolve_row_f32(padded.data(), k.data(), k.size(), tmp.row(y), static_cast<std::size_t>(w));
  }
  ImageF32 out(w, h, 0.f);
  for (int y = 0; y < h; ++y) {
    float* dst = out.row(y);
    for (int i = -r; i <= r; ++i) {
      kt.axpy_f32(k[static_cast<std::size_t>(i + r)], tmp.row(std::clamp(y + i, 0, h - 1)), dst,
                  static_cast<std::size_t>(w));
    }
  }
  return out;
}

ImageF32 to_float(const ImageGray8& img) {
  ImageF32 out(img.width(), img.height());
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
  return out;
}

ImageGray8 to_gray8(const ImageF32& img) {
  ImageGray8 out(img.width(), img.height());
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<std::uint8_t>(std::clamp(std::lround(src[i]), 0L, 255L));
  }
  return out;
}

namespace {

template <typename T>
float bilinear(const Image<T>& img, double x, double y) {
  const int w = img.width(), h = img.height();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = std::min(static_cast<int>(x), w - 1);
  const int y0 = std::min(static_cast<int>(y), h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = img.at(x0, y0) * (1 - fx) + img.at(x1, y0) * fx;
  const double bot = img.at(x0, y1) * (1 - fx) + img.at(x1, y1) * fx;
  return static_cast<float>(top * (1 - fy) + bot * fy);
}

}  // namespace

float sample_bilinear(const ImageGray8& img, double x, double y) { return bilinear(img, x, y); }
float sample_bilinear(const ImageF32& img, double x, double y) { return bilinear(img, x, y); }

ImageGray8 resize(const ImageGray8& img, int width, int height) {
  require(width >= 1 && height >= 1, ErrorCode::InvalidArgument, "resize target must be positive");
  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  // Shrinking supersamples each output pixel's footprint to avoid aliasing.
  const int nx = std::max(1, static_cast<int>(std::ceil(sx)));
  const int ny = std::max(1, static_cast<int>(std::ceil(sy)));
  ImageGray8 out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int j = 0; j < ny; ++j) {
        const double fy = y + (j + 0.5) / ny - 0.5;
        const double syv = (fy + 0.5) * sy - 0.5;
        for (int i = 0; i < nx; ++i) {
          const double fx = x + (i + 0.5) / nx - 0.5;
          acc += bilinear(img, (fx + 0.5) * sx - 0.5, syv);
        }
      }
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(acc / (nx * ny)), 0L, 255L));
    }
  }
  return out;
}

ImageGray8 warp_perspective(const ImageGray8& src, const std::array<double, 9>& m, int width, int height,
                            std::uint8_t fill) {
  ImageGray8 out(width, height, fill);
  const double lo_x = -0.5, hi_x = src.width() - 0.5, lo_y = -0.5, hi_y = src.height() - 0.5;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double wz = m[6] * x + m[7] * y + m[8];
      if (std::fabs(wz) < 1e-12) continue;
      const double u = (m[0] * x + m[1] * y + m[2]) / wz;
      const double v = (m[3] * x + m[4] * y + m[5]) / wz;
      if (u < lo_x || u >= hi_x || v < lo_y || v >= hi_y) continue;
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(bilinear(src, u, v)), 0L, 255L));
    }
  }
  return out;
}

ImageGray8 luma_from_interleaved(int width, int height, int channels, std::span<const std::uint8_t> data) {
  require(channels >= 1 && channels <= 4, ErrorCode::InvalidArgument, "unsupported channel count");
  require(data.size() >= static_cast<std::size_t>(width) * height * channels, ErrorCode::InvalidArgument,
          "pixel buffer too small");
  ImageGray8 out(width, height);
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const std::uint8_t* p = data.data() + i * static_cast<std::size_t>(channels);
    if (channels <= 2) {
      dst[i] = p[0];
    } else {
      const double yv = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
      dst[i] = static_cast<std::uint8_t>(std::clamp(std::lround(yv), 0L, 255L));
    }
  }
  return out;
}

}  // namespace mlens
