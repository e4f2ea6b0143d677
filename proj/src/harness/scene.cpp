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

#include "mlens/harness/scene.hpp"

#include <algorithm>
#include <cmath>

#include "mlens/common/random.hpp"
#include "mlens/img/ops.hpp"

namespace mlens::harness {
namespace {

constexpr double kPi = 3.14159265358979323846;

/// Sum of bilinearly upsampled random grids with amplitude proportional to
/// the cell size, which gives an approximately 1/f spectrum.
ImageF32 fractal_noise(Rng& rng, int w, int h, int coarsest_cell, int finest_cell) {
  ImageF32 out(w, h, 0.0f);
  for (int cell = coarsest_cell; cell >= finest_cell; cell /= 2) {
    const int gw = w / cell + 2, gh = h / cell + 2;
    ImageF32 grid(gw, gh);
    for (auto& v : grid.pixels()) v = static_cast<float>(rng.uniform(-1.0, 1.0) * cell);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(x, y) += sample_bilinear(grid, static_cast<double>(x) / cell, static_cast<double>(y) / cell);
  }
  return out;
}

void normalize_into(const ImageF32& src, ImageGray8& dst, double lo_out, double hi_out) {
  float lo = 1e30f, hi = -1e30f;
  for (float v : src.pixels()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = std::max(1e-6f, hi - lo);
  auto s = src.pixels();
  auto d = dst.pixels();
  for (std::size_t i = 0; i < s.size(); ++i)
    d[i] = static_cast<std::uint8_t>(std::lround(lo_out + (hi_out - lo_out) * (s[i] - lo) / span));
}

void fill_polygon(ImageF32& img, const std::vector<Point2>& poly, float value, float alpha) {
  double x0 = 1e30, x1 = -1e30, y0 = 1e30, y1 = -1e30;
  for (const auto& p : poly) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  const int ix0 = std::max(0, static_cast<int>(std::floor(x0))), ix1 = std::min(img.width() - 1, static_cast<int>(std::ceil(x1)));
  const int iy0 = std::max(0, static_cast<int>(std::floor(y0))), iy1 = std::min(img.height() - 1, static_cast<int>(std::ceil(y1)));
  for (int y = iy0; y <= iy1; ++y)
    for (int x = ix0; x <= ix1; ++x)
      if (point_in_polygon({static_cast<double>(x), static_cast<double>(y)}, poly))
        img.at(x, y) = (1 - alpha) * img.at(x, y) + alpha * value;
}

std::vector<Point2> ellipse(Point2 c, double rx, double ry, double rot, int n = 32) {
  std::vector<Point2> pts;
  for (int i = 0; i < n; ++i) {
    const double a = 2 * kPi * i / n;
    const double ex = rx * std::cos(a), ey = ry * std::sin(a);
    pts.push_back({c.x + ex * std::cos(rot) - ey * std::sin(rot), c.y + ex * std::sin(rot) + ey * std::cos(rot)});
  }
  return pts;
}

std::vector<Point2> rotated_rect(Point2 c, double hw, double hh, double rot) {
  std::vector<Point2> pts;
  const double cs = std::cos(rot), sn = std::sin(rot);
  for (auto [sx, sy] : {std::pair{-1, -1}, {1, -1}, {1, 1}, {-1, 1}})
    pts.push_back({c.x + sx * hw * cs - sy * hh * sn, c.y + sx * hw * sn + sy * hh * cs});
  return pts;
}

Homography rotation_about(double cx, double cy, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return Homography::translation(cx, cy) * Homography{{c, -s, 0, s, c, 0, 0, 0, 1}} * Homography::translation(-cx, -cy);
}

Homography scaling_about(double cx, double cy, double k) {
  return Homography::translation(cx, cy) * Homography::scaling(k, k) * Homography::translation(-cx, -cy);
}

/// Rotation of the viewed plane about the vertical axis through the image
/// centre, as seen by a pinhole camera with focal length f.
Homography tilt_about_vertical(double cx, double cy, double f, double angle) {
  const Homography k{{f, 0, cx, 0, f, cy, 0, 0, 1}};
  const Homography r{{std::cos(angle), 0, 0, 0, 1, 0, -std::sin(angle), 0, 1}};
  return k * r * k.inverse();
}

/// 0 -> 1 -> 0 over the duration.
double there_and_back(int t, int duration) {
  if (duration <= 1) return 0.0;
  const double u = static_cast<double>(t) / (duration - 1);
  return u <= 0.5 ? 2 * u : 2 * (1 - u);
}

double ramp(int t, int duration) { return duration <= 1 ? 0.0 : static_cast<double>(t) / (duration - 1); }

}  // namespace

ImageGray8 make_poster(std::uint64_t seed, int width, int height) {
  require(width >= 16 && height >= 16, ErrorCode::InvalidArgument, "poster too small");
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + 17);
  ImageF32 img(width, height);
  // Gradient base.
  const double g0 = rng.uniform(0, 255), g1 = rng.uniform(0, 255), ang = rng.uniform(0, 2 * kPi);
  const double dx = std::cos(ang) / width, dy = std::sin(ang) / height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double u = std::clamp(0.5 + (x - width / 2.0) * dx + (y - height / 2.0) * dy, 0.0, 1.0);
      img.at(x, y) = static_cast<float>(g0 + (g1 - g0) * u);
    }
  // Texture.
  const ImageF32 tex = fractal_noise(rng, width, height, 64, 4);
  const double tex_amp = rng.uniform(0.3, 1.0);
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels()[i] += static_cast<float>(tex_amp * tex.pixels()[i]);

  const double side = std::min(width, height);
  const int shapes = 18 + static_cast<int>(rng.below(18));
  for (int s = 0; s < shapes; ++s) {
    const Point2 c{rng.uniform(0, width), rng.uniform(0, height)};
    const double size = side * rng.uniform(0.04, 0.25);
    const float value = static_cast<float>(rng.uniform(0, 255));
    const float alpha = static_cast<float>(rng.uniform(0.6, 1.0));
    switch (rng.below(4)) {
      case 0:
        fill_polygon(img, rotated_rect(c, size, size * rng.uniform(0.2, 1.0), rng.uniform(0, kPi)), value, alpha);
        break;
      case 1:
        fill_polygon(img, ellipse(c, size, size * rng.uniform(0.3, 1.0), rng.uniform(0, kPi)), value, alpha);
        break;
      case 2: {
        std::vector<Point2> tri;
        for (int k = 0; k < 3; ++k) tri.push_back({c.x + rng.uniform(-size, size), c.y + rng.uniform(-size, size)});
        fill_polygon(img, tri, value, alpha);
        break;
      }
      default: {
        // Stripe block.
        const double rot = rng.uniform(0, kPi);
        const int n = 3 + static_cast<int>(rng.below(5));
        const double pitch = size / n;
        for (int k = 0; k < n; k += 2) {
          const double off = (k - n / 2.0) * pitch;
          const Point2 sc{c.x - off * std::sin(rot), c.y + off * std::cos(rot)};
          fill_polygon(img, rotated_rect(sc, size, pitch / 2, rot), value, alpha);
        }
      }
    }
  }
  // Glyph rows.
  const int rows = 2 + static_cast<int>(rng.below(4));
  for (int r = 0; r < rows; ++r) {
    const int cell = 2 + static_cast<int>(rng.below(2));
    const double gy = rng.uniform(0.05, 0.85) * height;
    double gx = rng.uniform(0.02, 0.3) * width;
    const double gx_end = gx + rng.uniform(0.3, 0.65) * width;
    const float ink = static_cast<float>(rng.bernoulli(0.5) ? rng.uniform(0, 60) : rng.uniform(195, 255));
    const float backing = 255.0f - ink;
    fill_polygon(img, {{gx - 3, gy - 3}, {gx_end + 3, gy - 3}, {gx_end + 3, gy + 7.0 * cell + 3}, {gx - 3, gy + 7.0 * cell + 3}},
                 backing, 0.85f);
    while (gx + 5 * cell < gx_end) {
      for (int by = 0; by < 7; ++by)
        for (int bx = 0; bx < 5; ++bx) {
          if (!rng.bernoulli(0.45)) continue;
          for (int py = 0; py < cell; ++py)
            for (int px = 0; px < cell; ++px) {
              const int x = static_cast<int>(gx) + bx * cell + px, y = static_cast<int>(gy) + by * cell + py;
              if (x >= 0 && y >= 0 && x < width && y < height) img.at(x, y) = ink;
            }
        }
      gx += 6 * cell + (rng.bernoulli(0.2) ? 4 * cell : 0);
    }
  }
  ImageGray8 out(width, height);
  normalize_into(gaussian_blur(img, 0.7), out, 8, 247);
  return out;
}

ImageGray8 make_sized_poster(std::uint64_t seed, int min_side, int max_side) {
  Rng rng(seed ^ 0x5bd1e995ULL);
  const int w = min_side + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_side - min_side + 1)));
  const int h = min_side + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_side - min_side + 1)));
  return make_poster(seed, w, h);
}

ImageGray8 make_natural_frame(std::uint64_t seed, int width, int height) {
  Rng rng(seed * 31 + 5);
  ImageF32 bg = fractal_noise(rng, width, height, 128, 2);
  ImageGray8 background(width, height);
  normalize_into(bg, background, 30, 220);

  std::vector<ImageGray8> refs;
  std::vector<std::size_t> which;
  std::vector<Homography> place;
  const int n = 2 + static_cast<int>(rng.below(2));
  for (int i = 0; i < n; ++i) {
    refs.push_back(make_sized_poster(rng.next(), 200, 320));
    const auto& r = refs.back();
    const double target = rng.uniform(0.35, 0.6) * height;
    const double k = target / r.height();
    const double cx = rng.uniform(0.15, 0.85) * width, cy = rng.uniform(0.3, 0.7) * height;
    Homography h = Homography::translation(cx, cy) * rotation_about(0, 0, rng.uniform(-0.3, 0.3)) *
                   Homography::scaling(k, k) * Homography::translation(-r.width() / 2.0, -r.height() / 2.0);
    h = tilt_about_vertical(cx, cy, 500.0, rng.uniform(-0.4, 0.4)) * h;
    which.push_back(static_cast<std::size_t>(i));
    place.push_back(h);
  }
  SceneRenderer renderer(refs);
  RenderOptions opt;
  opt.width = width;
  opt.height = height;
  opt.backdrop = &background;
  ImageGray8 out = renderer.render(which, place, opt);
  // Sensor noise.
  for (auto& v : out.pixels())
    v = static_cast<std::uint8_t>(std::clamp(std::lround(v + rng.normal(0.0, 2.0)), 0L, 255L));
  return out;
}

Quad reference_corners(int width, int height) {
  return {Point2{-0.5, -0.5}, Point2{width - 0.5, -0.5}, Point2{width - 0.5, height - 0.5}, Point2{-0.5, height - 0.5}};
}

std::string to_string(ScriptKind kind) {
  switch (kind) {
    case ScriptKind::Static: return "static";
    case ScriptKind::FastMove: return "fastmove";
    case ScriptKind::Rotate: return "rotate";
    case ScriptKind::Scale: return "scale";
    case ScriptKind::Tilt: return "tilt";
    case ScriptKind::Composite: return "composite";
  }
  return "unknown";
}

ScriptKind parse_script_kind(const std::string& name) {
  for (auto k : {ScriptKind::Static, ScriptKind::FastMove, ScriptKind::Rotate, ScriptKind::Scale, ScriptKind::Tilt,
                 ScriptKind::Composite})
    if (to_string(k) == name) return k;
  fail(ErrorCode::InvalidArgument, "unknown motion script '" + name + "'");
}

Homography script_motion(ScriptKind kind, int t, const ScriptParams& p) {
  const double cx = p.width / 2.0 - 0.5, cy = p.height / 2.0 - 0.5;
  switch (kind) {
    case ScriptKind::Static:
      return Homography::identity();
    case ScriptKind::FastMove: {
      // Triangle wave: right, back through the centre, left, back.
      const double a = p.move_amplitude_px, step = p.move_px_per_frame;
      const double phase = std::fmod(t * step, 4 * a);
      double x;
      if (phase < a)
        x = phase;
      else if (phase < 3 * a)
        x = 2 * a - phase;
      else
        x = phase - 4 * a;
      return Homography::translation(x, 0);
    }
    case ScriptKind::Rotate:
      return rotation_about(cx, cy, ramp(t, p.duration) * p.rotate_to_deg * kPi / 180.0);
    case ScriptKind::Scale:
      return scaling_about(cx, cy, 1.0 + (p.scale_to - 1.0) * there_and_back(t, p.duration));
    case ScriptKind::Tilt:
      return tilt_about_vertical(cx, cy, p.focal_px, ramp(t, p.duration) * p.tilt_to_deg * kPi / 180.0);
    case ScriptKind::Composite: {
      // Four equal segments, each continuing from where the last ended.
      const int seg = std::max(1, p.duration / 4);
      ScriptParams sp = p;
      sp.duration = seg;
      // One full sweep, so the motions that follow start from the centre.
      sp.move_amplitude_px = p.move_px_per_frame * (seg - 1) / 4.0;
      const ScriptKind order[4] = {ScriptKind::FastMove, ScriptKind::Rotate, ScriptKind::Scale, ScriptKind::Tilt};
      Homography acc = Homography::identity();
      for (int s = 0; s < 4; ++s) {
        const int local = std::clamp(t - s * seg, 0, seg - 1);
        const Homography m = script_motion(order[s], local, sp);
        if (t < (s + 1) * seg || s == 3) return (m * acc).normalized();
        acc = (m * acc).normalized();
      }
      return acc;
    }
  }
  return Homography::identity();
}

MotionScript make_script(ScriptKind kind, std::vector<Placement> placements, const ScriptParams& p) {
  require(p.duration >= 1, ErrorCode::InvalidScript, "script duration must be positive");
  MotionScript s;
  s.kind = kind;
  s.duration = p.duration;
  s.placements = std::move(placements);
  s.homographies.resize(static_cast<std::size_t>(p.duration));
  for (int t = 0; t < p.duration; ++t) {
    const Homography m = script_motion(kind, t, p);
    for (const auto& pl : s.placements) {
      const Homography h = (m * pl.to_frame).normalized();
      require(std::abs(h.determinant()) > 1e-12, ErrorCode::InvalidScript, "script homography is singular");
      s.homographies[static_cast<std::size_t>(t)].push_back(h);
    }
  }
  return s;
}

Placement centered_placement(std::size_t reference, int ref_width, int ref_height, int frame_width, int frame_height,
                             double target_height) {
  const double k = target_height / ref_height;
  const Homography h = Homography::translation(frame_width / 2.0 - 0.5, frame_height / 2.0 - 0.5) *
                       Homography::scaling(k, k) *
                       Homography::translation(-(ref_width / 2.0 - 0.5), -(ref_height / 2.0 - 0.5));
  return {reference, h};
}

SceneRenderer::SceneRenderer(const std::vector<ImageGray8>& references) {
  for (const auto& r : references) {
    std::vector<ImageGray8> levels{r};
    while (levels.back().width() >= 8 && levels.back().height() >= 8 && levels.size() < 6)
      levels.push_back(downsample(levels.back(), 2));
    pyramids_.push_back(std::move(levels));
  }
}

ImageGray8 SceneRenderer::render(const std::vector<std::size_t>& which, const std::vector<Homography>& to_frame,
                                 const RenderOptions& opt, std::uint64_t frame_seed) const {
  require(which.size() == to_frame.size(), ErrorCode::InvalidArgument, "placement list mismatch");
  ImageF32 acc(opt.width, opt.height, static_cast<float>(opt.background));
  if (opt.backdrop) {
    require(opt.backdrop->width() == opt.width && opt.backdrop->height() == opt.height, ErrorCode::InvalidArgument,
            "backdrop size must match the frame");
    acc = to_float(*opt.backdrop);
  }
  for (std::size_t k = 0; k < which.size(); ++k) {
    require(which[k] < pyramids_.size(), ErrorCode::InvalidArgument, "reference index out of range");
    const auto& pyr = pyramids_[which[k]];
    const int rw = pyr[0].width(), rh = pyr[0].height();
    const Homography inv = to_frame[k].inverse().normalized();
    const auto& a = inv.m;

    // Bounding box of the reference in the frame.
    double x0 = 1e30, x1 = -1e30, y0 = 1e30, y1 = -1e30;
    bool finite = true;
    for (const auto& c : reference_corners(rw, rh)) {
      try {
        const Point2 q = apply_homography(to_frame[k], c);
        x0 = std::min(x0, q.x);
        x1 = std::max(x1, q.x);
        y0 = std::min(y0, q.y);
        y1 = std::max(y1, q.y);
      } catch (const Error&) {
        finite = false;
      }
    }
    if (!finite) continue;
    const int ix0 = std::max(0, static_cast<int>(std::floor(x0)) - 1);
    const int ix1 = std::min(opt.width - 1, static_cast<int>(std::ceil(x1)) + 1);
    const int iy0 = std::max(0, static_cast<int>(std::floor(y0)) - 1);
    const int iy1 = std::min(opt.height - 1, static_cast<int>(std::ceil(y1)) + 1);

    for (int y = iy0; y <= iy1; ++y) {
      for (int x = ix0; x <= ix1; ++x) {
        const double w = a[6] * x + a[7] * y + a[8];
        if (w <= 1e-12) continue;
        const double u = (a[0] * x + a[1] * y + a[2]) / w;
        const double v = (a[3] * x + a[4] * y + a[5]) / w;
        // Local minification: sqrt(|det J|) of the frame -> reference map.
        const double j00 = (a[0] - u * a[6]) / w, j01 = (a[1] - u * a[7]) / w;
        const double j10 = (a[3] - v * a[6]) / w, j11 = (a[4] - v * a[7]) / w;
        const double scale = std::sqrt(std::max(1e-12, std::abs(j00 * j11 - j01 * j10)));
        const double inside = std::min({u + 0.5, rw - 0.5 - u, v + 0.5, rh - 0.5 - v});
        const double alpha = std::clamp(inside / scale + 0.5, 0.0, 1.0);
        if (alpha <= 0.0) continue;

        const double lod = std::clamp(std::log2(std::max(scale, 1.0)), 0.0, static_cast<double>(pyr.size() - 1));
        const int l0 = static_cast<int>(std::floor(lod));
        const int l1 = std::min(l0 + 1, static_cast<int>(pyr.size()) - 1);
        const double frac = lod - l0;
        auto sample_level = [&](int l) {
          const double f = static_cast<double>(1 << l);
          return sample_bilinear(pyr[static_cast<std::size_t>(l)], (u + 0.5) / f - 0.5, (v + 0.5) / f - 0.5);
        };
        double value = sample_level(l0);
        if (frac > 1e-6 && l1 != l0) value = (1 - frac) * value + frac * sample_level(l1);
        float& dst = acc.at(x, y);
        dst = static_cast<float>((1 - alpha) * dst + alpha * value);
      }
    }
  }
  if (opt.noise_sigma > 0) {
    Rng rng(opt.noise_seed * 0x2545f4914f6cdd1dULL + frame_seed);
    for (auto& v : acc.pixels()) v += static_cast<float>(rng.normal(0.0, opt.noise_sigma));
  }
  return to_gray8(acc);
}

std::vector<std::vector<Quad>> script_truth(const std::vector<ImageGray8>& references, const MotionScript& script) {
  std::vector<std::vector<Quad>> truth(script.homographies.size());
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (std::size_t k = 0; k < script.placements.size(); ++k) {
      const auto& ref = references.at(script.placements[k].reference);
      const Quad rc = reference_corners(ref.width(), ref.height());
      Quad q;
      for (int c = 0; c < 4; ++c) q[c] = apply_homography(script.homographies[t][k], rc[c]);
      truth[t].push_back(q);
    }
  }
  return truth;
}

Sequence generate_sequence(const std::vector<ImageGray8>& references, const MotionScript& script,
                           const RenderOptions& opt) {
  Sequence seq;
  seq.truth = script_truth(references, script);
  const Quad frame_quad = reference_corners(opt.width, opt.height);
  for (std::size_t k = 0; k < script.placements.size(); ++k) {
    bool ever_visible = false;
    for (const auto& per_frame : seq.truth) {
      const auto hull = convex_hull(std::vector<Point2>(per_frame[k].begin(), per_frame[k].end()));
      if (hull.size() >= 3 && !clip_convex(hull, frame_quad).empty()) {
        ever_visible = true;
        break;
      }
    }
    if (!ever_visible) fail(ErrorCode::InvalidScript, "a placed reference never enters the frame");
  }
  SceneRenderer renderer(references);
  std::vector<std::size_t> which;
  for (const auto& pl : script.placements) which.push_back(pl.reference);
  for (std::size_t t = 0; t < script.homographies.size(); ++t)
    seq.frames.push_back(renderer.render(which, script.homographies[t], opt, t));
  return seq;
}

}  // namespace mlens::harness
