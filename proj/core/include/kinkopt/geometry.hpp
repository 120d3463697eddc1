#pragma once

// Small planar-geometry kernel shared by the level-set, region-splitting and
// curvature code: exact clipping of convex polygons against affine half-planes
// (P1 fields restricted to a triangle are affine, so all region boundaries we
// ever clip are straight lines), polygon quadrature, and point/segment
// distances.

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace kinkopt::geom {

using Vec2 = Eigen::Vector2d;
using Polygon = std::vector<Vec2>;

/// Affine scalar function l(p) = c0 + g . p
struct AffineFn {
  double c0 = 0.0;
  Vec2 g = Vec2::Zero();

  double operator()(const Vec2& p) const { return c0 + g.dot(p); }

  /// Affine interpolant of nodal values (v0,v1,v2) on triangle (p0,p1,p2).
  static AffineFn from_triangle(const Vec2& p0, const Vec2& p1, const Vec2& p2, double v0,
                                double v1, double v2);
};

double polygon_area(const Polygon& poly);  ///< signed (CCW positive)

/// Keep the part of `poly` where l >= 0 (Sutherland--Hodgman, exact crossings).
Polygon clip_half_plane(const Polygon& poly, const AffineFn& l);

/// Keep the part where the line through a,b leaves `keep_left ? left : right`.
Polygon clip_segment_line(const Polygon& poly, const Vec2& a, const Vec2& b, bool keep_left);

/// Degree-2 (edge-midpoint) quadrature of f over a polygon, fanned from vertex 0.
double integrate_polygon(const Polygon& poly, const std::function<double(const Vec2&)>& f);

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);
Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b);

/// Distance from p to a polyline given as an ordered point list.
double point_polyline_distance(const Vec2& p, const std::vector<Vec2>& pts);

}  // namespace kinkopt::geom
