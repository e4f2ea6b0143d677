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

#include "mlens/seg/segment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "mlens/img/ops.hpp"

namespace mlens::seg {

ImageF32 variance_map(const ImageGray8& img, int window, int stride) {
  require(window >= 1 && stride >= 1, ErrorCode::InvalidArgument, "window and stride must be positive");
  require(window <= img.width() && window <= img.height(), ErrorCode::InvalidArgument,
          "variance window larger than the image");
  const int w = img.width(), h = img.height();
  // Integral images of values and squares; int64 is exact for any 8-bit
  // frame up to 2^31 pixels.
  std::vector<std::int64_t> s1(static_cast<std::size_t>(w + 1) * (h + 1), 0), s2(s1.size(), 0);
  auto at = [w](std::vector<std::int64_t>& v, int x, int y) -> std::int64_t& {
    return v[static_cast<std::size_t>(y) * (w + 1) + x];
  };
  for (int y = 0; y < h; ++y) {
    std::int64_t r1 = 0, r2 = 0;
    const std::uint8_t* row = img.row(y);
    for (int x = 0; x < w; ++x) {
      r1 += row[x];
      r2 += static_cast<std::int64_t>(row[x]) * row[x];
      at(s1, x + 1, y + 1) = at(s1, x + 1, y) + r1;
      at(s2, x + 1, y + 1) = at(s2, x + 1, y) + r2;
    }
  }
  const int ow = (w - window) / stride + 1, oh = (h - window) / stride + 1;
  ImageF32 out(ow, oh);
  const double n = static_cast<double>(window) * window;
  for (int j = 0; j < oh; ++j) {
    for (int i = 0; i < ow; ++i) {
      const int x0 = i * stride, y0 = j * stride, x1 = x0 + window, y1 = y0 + window;
      const std::int64_t a = at(s1, x1, y1) - at(s1, x0, y1) - at(s1, x1, y0) + at(s1, x0, y0);
      const std::int64_t b = at(s2, x1, y1) - at(s2, x0, y1) - at(s2, x1, y0) + at(s2, x0, y0);
      // n * sum(x^2) - (sum x)^2 is exact in integers.
      const double num = static_cast<double>(static_cast<std::int64_t>(n) * b - a * a);
      out.at(i, j) = static_cast<float>(num / (n * n));
    }
  }
  return out;
}

namespace {

std::vector<std::uint8_t> morph(const std::vector<std::uint8_t>& in, int width, int height, int radius, bool erode) {
  std::vector<std::uint8_t> tmp(in.size()), out(in.size());
  // Separable square element: rows then columns.
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      std::uint8_t v = erode ? 1 : 0;
      for (int k = std::max(0, x - radius); k <= std::min(width - 1, x + radius); ++k) {
        const std::uint8_t m = in[static_cast<std::size_t>(y) * width + k];
        v = erode ? (v & m) : (v | m);
      }
      tmp[static_cast<std::size_t>(y) * width + x] = v;
    }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      std::uint8_t v = erode ? 1 : 0;
      for (int k = std::max(0, y - radius); k <= std::min(height - 1, y + radius); ++k) {
        const std::uint8_t m = tmp[static_cast<std::size_t>(k) * width + x];
        v = erode ? (v & m) : (v | m);
      }
      out[static_cast<std::size_t>(y) * width + x] = v;
    }
  return out;
}

}  // namespace

std::vector<std::uint8_t> open_mask(const std::vector<std::uint8_t>& mask, int width, int height, int radius) {
  if (radius <= 0) return mask;
  return morph(morph(mask, width, height, radius, true), width, height, radius, false);
}

std::vector<std::uint8_t> close_mask(const std::vector<std::uint8_t>& mask, int width, int height, int radius) {
  if (radius <= 0) return mask;
  return morph(morph(mask, width, height, radius, false), width, height, radius, true);
}

std::vector<std::uint8_t> fill_holes(const std::vector<std::uint8_t>& mask, int width, int height) {
  std::vector<std::uint8_t> outside(mask.size(), 0);
  std::vector<int> stack;
  auto seed = [&](int x, int y) {
    const int p = y * width + x;
    if (!mask[static_cast<std::size_t>(p)] && !outside[static_cast<std::size_t>(p)]) {
      outside[static_cast<std::size_t>(p)] = 1;
      stack.push_back(p);
    }
  };
  for (int x = 0; x < width; ++x) {
    seed(x, 0);
    seed(x, height - 1);
  }
  for (int y = 0; y < height; ++y) {
    seed(0, y);
    seed(width - 1, y);
  }
  while (!stack.empty()) {
    const int p = stack.back();
    stack.pop_back();
    const int x = p % width, y = p / width;
    if (x > 0) seed(x - 1, y);
    if (x + 1 < width) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < height) seed(x, y + 1);
  }
  std::vector<std::uint8_t> out(mask.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = outside[i] ? 0 : 1;
  return out;
}

int label_components(const std::vector<std::uint8_t>& mask, int width, int height, std::vector<int>& labels) {
  labels.assign(mask.size(), 0);
  int next = 0;
  std::vector<int> stack;
  for (int start = 0; start < width * height; ++start) {
    if (!mask[static_cast<std::size_t>(start)] || labels[static_cast<std::size_t>(start)]) continue;
    ++next;
    labels[static_cast<std::size_t>(start)] = next;
    stack.assign(1, start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int px = p % width, py = p / width;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = px + dx, y = py + dy;
          if (x < 0 || y < 0 || x >= width || y >= height) continue;
          const int q = y * width + x;
          if (mask[static_cast<std::size_t>(q)] && !labels[static_cast<std::size_t>(q)]) {
            labels[static_cast<std::size_t>(q)] = next;
            stack.push_back(q);
          }
        }
    }
  }
  return next;
}

SegmentPatch crop_quad(const ImageGray8& frame, const Quad& quad, int size) {
  require(size >= 1, ErrorCode::InvalidArgument, "patch size must be positive");
  const Quad patch_corners{Point2{-0.5, -0.5}, {size - 0.5, -0.5}, {size - 0.5, size - 0.5}, {-0.5, size - 0.5}};
  SegmentPatch p;
  p.patch_to_frame = fit_homography_dlt(patch_corners, quad).normalized();
  // Fill with the nearest frame content so the crop has no artificial edge.
  ImageGray8 img(size, size);
  const auto& m = p.patch_to_frame.m;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double w = m[6] * x + m[7] * y + m[8];
      const double u = (m[0] * x + m[1] * y + m[2]) / w, v = (m[3] * x + m[4] * y + m[5]) / w;
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(sample_bilinear(frame, u, v)), 0L, 255L));
    }
  p.image = std::move(img);
  p.bbox_corners = quad;
  p.polygon.assign(quad.begin(), quad.end());
  p.source_width = frame.width();
  p.source_height = frame.height();
  return p;
}

SegmentPatch whole_frame_patch(const ImageGray8& frame, int patch_size) {
  return crop_quad(frame, Quad{Point2{-0.5, -0.5}, {frame.width() - 0.5, -0.5},
                               {frame.width() - 0.5, frame.height() - 0.5}, {-0.5, frame.height() - 0.5}},
                   patch_size);
}

std::vector<SegmentPatch> segment(const ImageGray8& frame, const SegConfig& cfg) {
  require(frame.width() >= 64 && frame.height() >= 64, ErrorCode::InvalidArgument, "frame must be at least 64x64");
  const ImageGray8 blurred = gaussian_blur(frame, cfg.sigma);
  const ImageF32 var = variance_map(blurred, cfg.window, cfg.stride);
  const int mw = var.width(), mh = var.height();
  std::vector<std::uint8_t> mask(var.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = var.pixels()[i] > cfg.var_threshold;
  // Posters with flat interior regions leave holes and gaps in their outline
  // that an opening would widen into cuts, so the outline is taken from the
  // closed and filled mask and the opening only decides which components
  // are substantial enough to keep.
  mask = fill_holes(close_mask(mask, mw, mh, 1), mw, mh);
  const auto core = open_mask(mask, mw, mh, cfg.morph_radius);
  std::vector<int> labels;
  const int n = label_components(mask, mw, mh, labels);
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(n) + 1, 0);
  for (std::size_t i = 0; i < core.size(); ++i)
    if (core[i]) keep[static_cast<std::size_t>(labels[i])] = 1;

  const double fx0 = -0.5, fy0 = -0.5, fx1 = frame.width() - 0.5, fy1 = frame.height() - 0.5;
  const Quad frame_quad{Point2{fx0, fy0}, {fx1, fy0}, {fx1, fy1}, {fx0, fy1}};

  // Per component: hull of the window footprints of its cells.
  std::vector<std::vector<Point2>> hulls;
  {
    std::vector<std::vector<Point2>> pts(static_cast<std::size_t>(n));
    for (int j = 0; j < mh; ++j)
      for (int i = 0; i < mw; ++i) {
        const int l = labels[static_cast<std::size_t>(j) * mw + i];
        if (!l || !keep[static_cast<std::size_t>(l)]) continue;
        const double x0 = i * cfg.stride - 0.5, y0 = j * cfg.stride - 0.5;
        const double x1 = x0 + cfg.window, y1 = y0 + cfg.window;
        auto& v = pts[static_cast<std::size_t>(l - 1)];
        v.insert(v.end(), {Point2{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
      }
    for (auto& v : pts) {
      auto hull = convex_hull(std::move(v));
      if (hull.size() >= 3) hulls.push_back(std::move(hull));
    }
  }

  // Merge overlapping components until stable.
  struct Region {
    std::vector<Point2> hull;
    Quad quad;
  };
  std::vector<Region> regions;
  for (auto& h : hulls) regions.push_back({h, enclosing_quad(h)});
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t a = 0; a < regions.size() && !merged; ++a)
      for (std::size_t b = a + 1; b < regions.size() && !merged; ++b) {
        if (convex_iou(regions[a].quad, regions[b].quad) <= cfg.merge_iou) continue;
        std::vector<Point2> all = regions[a].hull;
        all.insert(all.end(), regions[b].hull.begin(), regions[b].hull.end());
        regions[a].hull = convex_hull(std::move(all));
        regions[a].quad = enclosing_quad(regions[a].hull);
        regions.erase(regions.begin() + static_cast<std::ptrdiff_t>(b));
        merged = true;
      }
  }

  std::vector<SegmentPatch> out;
  for (auto& r : regions) {
    std::vector<Point2> poly = clip_convex(r.hull, frame_quad);
    if (poly.size() < 3 || polygon_area(poly) < cfg.min_area_px) continue;
    Quad q = order_quad(r.quad);
    for (auto& p : q) {
      p.x = std::clamp(p.x, fx0, fx1);
      p.y = std::clamp(p.y, fy0, fy1);
    }
    if (!is_simple_quad(q)) continue;
    SegmentPatch patch = crop_quad(frame, q, cfg.patch_size);
    patch.polygon = std::move(poly);
    out.push_back(std::move(patch));
  }
  return out;
}

}  // namespace mlens::seg
