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

#include "mlens/track/optical_flow.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mlens/img/ops.hpp"
#include "mlens/simd/kernels.hpp"

namespace mlens {
namespace {

ImageF32 pyr_down(const ImageF32& src) {
  const ImageF32 smooth = gaussian_blur(src, 1.0);
  const int w = std::max(1, (src.width() + 1) / 2), h = std::max(1, (src.height() + 1) / 2);
  ImageF32 out(w, h);
  for (int y = 0; y < h; ++y) {
    const float* s = smooth.row(std::min(2 * y, src.height() - 1));
    float* d = out.row(y);
    for (int x = 0; x < w; ++x) d[x] = s[std::min(2 * x, src.width() - 1)];
  }
  return out;
}

// Scharr derivative scaled to intensity units per pixel.
void scharr(const ImageF32& img, ImageF32& gx, ImageF32& gy) {
  const int w = img.width(), h = img.height();
  gx = ImageF32(w, h);
  gy = ImageF32(w, h);
  for (int y = 0; y < h; ++y) {
    const float* r0 = img.row(std::max(0, y - 1));
    const float* r1 = img.row(y);
    const float* r2 = img.row(std::min(h - 1, y + 1));
    float* ox = gx.row(y);
    float* oy = gy.row(y);
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(0, x - 1), xr = std::min(w - 1, x + 1);
      ox[x] = (3.f * (r0[xr] - r0[xl]) + 10.f * (r1[xr] - r1[xl]) + 3.f * (r2[xr] - r2[xl])) / 32.f;
      oy[x] = (3.f * (r2[xl] - r0[xl]) + 10.f * (r2[x] - r0[x]) + 3.f * (r2[xr] - r0[xr])) / 32.f;
    }
  }
}

// Copies the (size+1) x (size+1) block whose top-left pixel is (x0, y0),
// replicating the border for parts outside the image.
void copy_block(const ImageF32& img, int x0, int y0, int size, std::vector<float>& out) {
  const int n = size + 1;
  out.resize(static_cast<std::size_t>(n) * n);
  const int w = img.width(), h = img.height();
  const bool inside = x0 >= 0 && y0 >= 0 && x0 + n <= w && y0 + n <= h;
  for (int r = 0; r < n; ++r) {
    float* dst = out.data() + static_cast<std::size_t>(r) * n;
    if (inside) {
      std::copy_n(img.row(y0 + r) + x0, n, dst);
    } else {
      const float* src = img.row(std::clamp(y0 + r, 0, h - 1));
      for (int c = 0; c < n; ++c) dst[c] = src[std::clamp(x0 + c, 0, w - 1)];
    }
  }
}

// Bilinear window of `size` x `size` samples centred on (cx, cy).
void sample_window(const ImageF32& img, double cx, double cy, int size, std::vector<float>& block,
                   std::vector<float>& out) {
  const int half = size / 2;
  const double fx0 = cx - half, fy0 = cy - half;
  const int x0 = static_cast<int>(std::floor(fx0)), y0 = static_cast<int>(std::floor(fy0));
  const float ax = static_cast<float>(fx0 - x0), ay = static_cast<float>(fy0 - y0);
  const float w00 = (1 - ax) * (1 - ay), w01 = ax * (1 - ay), w10 = (1 - ax) * ay, w11 = ax * ay;
  copy_block(img, x0, y0, size, block);
  const int n = size + 1;
  out.resize(static_cast<std::size_t>(size) * size);
  for (int r = 0; r < size; ++r) {
    const float* b0 = block.data() + static_cast<std::size_t>(r) * n;
    const float* b1 = b0 + n;
    float* o = out.data() + static_cast<std::size_t>(r) * size;
    for (int c = 0; c < size; ++c) o[c] = w00 * b0[c] + w01 * b0[c + 1] + w10 * b1[c] + w11 * b1[c + 1];
  }
}

}  // namespace

FlowPyramid::FlowPyramid(const ImageGray8& img, int levels) {
  require(levels >= 1, ErrorCode::InvalidArgument, "pyramid needs at least one level");
  images_.push_back(to_float(img));
  for (int l = 1; l < levels; ++l) {
    if (images_.back().width() < 16 || images_.back().height() < 16) break;
    images_.push_back(pyr_down(images_.back()));
  }
  gx_.resize(images_.size());
  gy_.resize(images_.size());
  for (std::size_t l = 0; l < images_.size(); ++l) scharr(images_[l], gx_[l], gy_[l]);
}

FlowResult track_optical_flow(const FlowPyramid& prev, const FlowPyramid& next, std::span<const Point2> pts,
                              const FlowConfig& cfg) {
  require(prev.width() == next.width() && prev.height() == next.height(), ErrorCode::InvalidArgument,
          "optical flow frames differ in size");
  require(cfg.window >= 3 && cfg.window % 2 == 1, ErrorCode::InvalidArgument, "flow window must be odd and >= 3");
  const auto& kt = simd::kernels();
  const int levels = std::min(prev.levels(), next.levels());
  const int win = cfg.window;
  const int half = win / 2;
  const std::size_t area = static_cast<std::size_t>(win) * win;

  FlowResult res;
  res.new_points.resize(pts.size());
  res.status.assign(pts.size(), 1);
  res.residual.assign(pts.size(), 0.f);

  std::vector<float> block, tmpl, ix, iy, jblock;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point2 p0 = pts[i];
    double gx = 0.0, gy = 0.0;  // guess carried between levels, in level units
    bool ok = true;
    float residual = 0.f;
    for (int l = levels - 1; l >= 0 && ok; --l) {
      const double s = 1.0 / static_cast<double>(1 << l);
      const double px = p0.x * s, py = p0.y * s;
      const ImageF32& pi = prev.image(l);
      const ImageF32& nj = next.image(l);
      sample_window(pi, px, py, win, block, tmpl);
      sample_window(prev.grad_x(l), px, py, win, block, ix);
      sample_window(prev.grad_y(l), px, py, win, block, iy);
      double a11 = 0, a12 = 0, a22 = 0;
      for (std::size_t k = 0; k < area; ++k) {
        a11 += ix[k] * ix[k];
        a12 += ix[k] * iy[k];
        a22 += iy[k] * iy[k];
      }
      const double det = a11 * a22 - a12 * a12;
      const double min_eig = (a11 + a22 - std::sqrt((a11 - a22) * (a11 - a22) + 4 * a12 * a12)) / (2.0 * area);
      if (min_eig < cfg.min_eigen || det < 1e-12) {
        ok = false;
        break;
      }
      double dx = gx, dy = gy;
      simd::LkAccum acc;
      for (int it = 0; it < cfg.max_iterations; ++it) {
        const double cx = px + dx, cy = py + dy;
        if (cx < -half || cy < -half || cx > nj.width() - 1 + half || cy > nj.height() - 1 + half) {
          ok = false;
          break;
        }
        const double fx0 = cx - half, fy0 = cy - half;
        const int x0 = static_cast<int>(std::floor(fx0)), y0 = static_cast<int>(std::floor(fy0));
        const float ax = static_cast<float>(fx0 - x0), ay = static_cast<float>(fy0 - y0);
        const float w4[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
        copy_block(nj, x0, y0, win, jblock);
        acc = {};
        const int n = win + 1;
        for (int r = 0; r < win; ++r) {
          const float* j0 = jblock.data() + static_cast<std::size_t>(r) * n;
          kt.lk_row(j0, j0 + n, w4, tmpl.data() + static_cast<std::size_t>(r) * win,
                    ix.data() + static_cast<std::size_t>(r) * win, iy.data() + static_cast<std::size_t>(r) * win,
                    static_cast<std::size_t>(win), &acc);
        }
        const double ddx = (a22 * acc.bx - a12 * acc.by) / det;
        const double ddy = (a11 * acc.by - a12 * acc.bx) / det;
        dx += ddx;
        dy += ddy;
        if (ddx * ddx + ddy * ddy < cfg.epsilon * cfg.epsilon) break;
      }
      residual = acc.abs_err / static_cast<float>(area);
      if (l > 0) {
        gx = 2.0 * dx;
        gy = 2.0 * dy;
      } else {
        gx = dx;
        gy = dy;
      }
    }
    const Point2 q{p0.x + gx, p0.y + gy};
    res.new_points[i] = q;
    res.residual[i] = residual;
    if (!ok || !std::isfinite(q.x) || !std::isfinite(q.y) || q.x < 0 || q.y < 0 || q.x > next.width() - 1 ||
        q.y > next.height() - 1 || residual > cfg.max_residual) {
      res.status[i] = 0;
    }
  }
  return res;
}

FlowResult track_optical_flow(const ImageGray8& prev, const ImageGray8& next, std::span<const Point2> pts,
                              const FlowConfig& cfg) {
  require(prev.width() == next.width() && prev.height() == next.height(), ErrorCode::InvalidArgument,
          "optical flow frames differ in size");
  return track_optical_flow(FlowPyramid(prev, cfg.levels), FlowPyramid(next, cfg.levels), pts, cfg);
}

}  // namespace mlens
