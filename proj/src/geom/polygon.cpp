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

#include "mlens/geom/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "mlens/common/error.hpp"

namespace mlens {
namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(const Point2& p, const Point2& a, const Point2& b) {
  if (std::fabs(cross(a, b, p)) > 1e-9 * (1.0 + distance(a, b))) return false;
  return p.x >= std::min(a.x, b.x) - 1e-12 && p.x <= std::max(a.x, b.x) + 1e-12 &&
         p.y >= std::min(a.y, b.y) - 1e-12 && p.y <= std::max(a.y, b.y) + 1e-12;
}

bool segments_cross(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double d1 = cross(c, d, a), d2 = cross(c, d, b), d3 = cross(a, b, c), d4 = cross(a, b, d);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

std::optional<Point2> line_intersection(const Point2& p1, const Point2& p2, const Point2& p3, const Point2& p4) {
  const double den = (p1.x - p2.x) * (p3.y - p4.y) - (p1.y - p2.y) * (p3.x - p4.x);
  if (std::fabs(den) < 1e-12) return std::nullopt;
  const double a = p1.x * p2.y - p1.y * p2.x;
  const double b = p3.x * p4.y - p3.y * p4.x;
  return Point2{(a * (p3.x - p4.x) - (p1.x - p2.x) * b) / den, (a * (p3.y - p4.y) - (p1.y - p2.y) * b) / den};
}

}  // namespace

bool point_in_polygon(const Point2& p, std::span<const Point2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  int winding = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % n];
    if (on_segment(p, a, b)) return true;
    if (a.y <= p.y) {
      if (b.y > p.y && cross(a, b, p) > 0) ++winding;
    } else {
      if (b.y <= p.y && cross(a, b, p) < 0) --winding;
    }
  }
  return winding != 0;
}

double signed_area(std::span<const Point2> poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % poly.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * s;
}

double polygon_area(std::span<const Point2> poly) { return std::fabs(signed_area(poly)); }

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  // Monotone chain yields counter-clockwise order in a y-up frame, which is
  // clockwise on screen.
  return hull;
}

bool is_simple_quad(const Quad& q) {
  if (polygon_area(q) < 1e-9) return false;
  return !segments_cross(q[0], q[1], q[2], q[3]) && !segments_cross(q[1], q[2], q[3], q[0]);
}

Point2 quad_center(const Quad& q) {
  auto p = line_intersection(q[0], q[2], q[1], q[3]);
  if (!p) fail(ErrorCode::DegenerateQuad, "quadrilateral diagonals are parallel");
  return *p;
}

Quad order_quad(std::span<const Point2> pts) {
  require(pts.size() == 4, ErrorCode::InvalidArgument, "quad needs four points");
  Point2 c{0, 0};
  for (const auto& p : pts) c = c + p * 0.25;
  std::array<Point2, 4> q{pts[0], pts[1], pts[2], pts[3]};
  // Clockwise on screen == increasing atan2 with y pointing down.
  std::sort(q.begin(), q.end(), [&](const Point2& a, const Point2& b) {
    return std::atan2(a.y - c.y, a.x - c.x) < std::atan2(b.y - c.y, b.x - c.x);
  });
  std::size_t start = 0;
  for (std::size_t i = 1; i < 4; ++i)
    if (q[i].x + q[i].y < q[start].x + q[start].y) start = i;
  Quad out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = q[(start + i) % 4];
  return out;
}

Quad enclosing_quad(std::span<const Point2> convex_polygon) {
  std::vector<Point2> poly(convex_polygon.begin(), convex_polygon.end());
  require(poly.size() >= 3, ErrorCode::InvalidArgument, "polygon needs at least three vertices");
  if (poly.size() == 3) {
    // Split the longest edge to get a fourth vertex.
    std::size_t best = 0;
    double len = -1;
    for (std::size_t i = 0; i < 3; ++i) {
      const double l = distance(poly[i], poly[(i + 1) % 3]);
      if (l > len) {
        len = l;
        best = i;
      }
    }
    poly.insert(poly.begin() + static_cast<std::ptrdiff_t>(best + 1), (poly[best] + poly[(best + 1) % 3]) * 0.5);
  }
  while (poly.size() > 4) {
    const std::size_t n = poly.size();
    double best_cost = std::numeric_limits<double>::infinity();
    std::size_t best_i = n;
    Point2 best_pt;
    // Collapsing edge (i, i+1): extend edges (i-1, i) and (i+1, i+2) to meet.
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& a = poly[(i + n - 1) % n];
      const Point2& b = poly[i];
      const Point2& c = poly[(i + 1) % n];
      const Point2& d = poly[(i + 2) % n];
      auto x = line_intersection(a, b, c, d);
      if (!x) continue;
      // The new apex must lie beyond the edge, on the outside.
      const double side_edge = cross(b, c, *x);
      const double side_inside = cross(b, c, poly[(i + 3) % n]);
      if ((side_edge > 0) == (side_inside > 0) && std::fabs(side_edge) > 1e-12) continue;
      const Point2 tri[3] = {b, *x, c};
      const double cost = polygon_area(tri);
      if (cost < best_cost) {
        best_cost = cost;
        best_i = i;
        best_pt = *x;
      }
    }
    if (best_i == n) {
      // No admissible collapse (e.g. parallel edges); drop the vertex whose
      // removal changes the area least.
      std::size_t drop = 0;
      double least = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        const Point2 tri[3] = {poly[(i + n - 1) % n], poly[i], poly[(i + 1) % n]};
        const double a = polygon_area(tri);
        if (a < least) {
          least = a;
          drop = i;
        }
      }
      poly.erase(poly.begin() + static_cast<std::ptrdiff_t>(drop));
      continue;
    }
    poly[best_i] = best_pt;
    poly.erase(poly.begin() + static_cast<std::ptrdiff_t>((best_i + 1) % n));
  }
  return order_quad(poly);
}

std::vector<Point2> clip_convex(std::span<const Point2> subject, std::span<const Point2> clip) {
  std::vector<Point2> out(subject.begin(), subject.end());
  const double orient = signed_area(clip) >= 0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < clip.size() && !out.empty(); ++i) {
    const Point2& a = clip[i];
    const Point2& b = clip[(i + 1) % clip.size()];
    std::vector<Point2> in = std::move(out);
    out.clear();
    for (std::size_t j = 0; j < in.size(); ++j) {
      const Point2& p = in[j];
      const Point2& q = in[(j + 1) % in.size()];
      const bool p_in = orient * cross(a, b, p) >= 0;
      const bool q_in = orient * cross(a, b, q) >= 0;
      if (p_in) out.push_back(p);
      if (p_in != q_in) {
        if (auto x = line_intersection(a, b, p, q)) out.push_back(*x);
      }
    }
  }
  return out;
}

double convex_iou(std::span<const Point2> a, std::span<const Point2> b) {
  const auto inter = clip_convex(a, b);
  const double ia = inter.size() >= 3 ? polygon_area(inter) : 0.0;
  const double ua = polygon_area(a) + polygon_area(b) - ia;
  return ua > 0 ? ia / ua : 0.0;
}

}  // namespace mlens
