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
#include <span>
#include <vector>

#include "mlens/img/image.hpp"

namespace mlens {

using Quad = std::array<Point2, 4>;

/// Winding-number containment; points on the boundary count as inside.
bool point_in_polygon(const Point2& p, std::span<const Point2> polygon);

/// Signed shoelace area (positive for clockwise order in image coordinates,
/// i.e. y pointing down).
double signed_area(std::span<const Point2> polygon);
double polygon_area(std::span<const Point2> polygon);

/// Monotone-chain hull, clockwise in image coordinates, collinear points
/// dropped.
std::vector<Point2> convex_hull(std::vector<Point2> pts);

/// True when no two non-adjacent edges cross and the area is non-zero.
bool is_simple_quad(const Quad& q);

/// Intersection of the diagonals q0-q2 and q1-q3. Throws DegenerateQuad when
/// the diagonals are parallel.
Point2 quad_center(const Quad& q);

/// Reorders four points as TL, TR, BR, BL (clockwise on screen starting from
/// the vertex with the smallest x + y).
Quad order_quad(std::span<const Point2> pts);

/// Reduces a convex polygon to an enclosing quadrilateral by repeatedly
/// collapsing the edge whose removal adds the least area.
Quad enclosing_quad(std::span<const Point2> convex_polygon);

/// Intersection of two convex polygons (Sutherland-Hodgman).
std::vector<Point2> clip_convex(std::span<const Point2> subject, std::span<const Point2> clip);

double convex_iou(std::span<const Point2> a, std::span<const Point2> b);

}  // namespace mlens
