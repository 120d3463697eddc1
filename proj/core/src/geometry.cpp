#include "kinkopt/geometry.hpp"

#include <cmath>

namespace kinkopt::geom {

AffineFn AffineFn::from_triangle(const Vec2& p0, const Vec2& p1, const Vec2& p2, double v0,
                                 double v1, double v2) {
  // Solve for (c0, g) with l(pi) = vi; 2x2 system in the gradient.
  Eigen::Matrix2d M;
  M.row(0) = (p1 - p0).transpose();
  M.row(1) = (p2 - p0).transpose();
  Eigen::Vector2d rhs(v1 - v0, v2 - v0);
  AffineFn l;
  l.g = M.inverse() * rhs;
  l.c0 = v0 - l.g.dot(p0);
  return l;
}

double polygon_area(const Polygon& poly) {
  double a = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

Polygon clip_half_plane(const Polygon& poly, const AffineFn& l) {
  Polygon out;
  const std::size_t n = poly.size();
  if (n == 0) return out;
  out.reserve(n + 2);
  double prev_v = l(poly[n - 1]);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& prev = poly[(i + n - 1) % n];
    const Vec2& cur = poly[i];
    double cur_v = l(cur);
    if (cur_v >= 0.0) {
      if (prev_v < 0.0) {
        double t = prev_v / (prev_v - cur_v);
        out.push_back(prev + t * (cur - prev));
      }
      out.push_back(cur);
    } else if (prev_v >= 0.0) {
      double t = prev_v / (prev_v - cur_v);
      out.push_back(prev + t * (cur - prev));
    }
    prev_v = cur_v;
  }
  if (out.size() < 3 || std::abs(polygon_area(out)) < 1e-30) out.clear();
  return out;
}

Polygon clip_segment_line(const Polygon& poly, const Vec2& a, const Vec2& b, bool keep_left) {
  Vec2 d = b - a;
  AffineFn l;
  l.g = keep_left ? Vec2(-d.y(), d.x()) : Vec2(d.y(), -d.x());
  l.c0 = -l.g.dot(a);
  return clip_half_plane(poly, l);
}

double integrate_polygon(const Polygon& poly, const std::function<double(const Vec2&)>& f) {
  if (poly.size() < 3) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
    const Vec2& a = poly[0];
    const Vec2& b = poly[i];
    const Vec2& c = poly[i + 1];
    double area = 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
    Vec2 mab = 0.5 * (a + b), mbc = 0.5 * (b + c), mca = 0.5 * (c + a);
    sum += area / 3.0 * (f(mab) + f(mbc) + f(mca));
  }
  return sum;
}

Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 d = b - a;
  double len2 = d.squaredNorm();
  if (len2 == 0.0) return a;
  double t = (p - a).dot(d) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return a + t * d;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  return (p - closest_point_on_segment(p, a, b)).norm();
}

double point_polyline_distance(const Vec2& p, const std::vector<Vec2>& pts) {
  if (pts.empty()) return std::numeric_limits<double>::infinity();
  if (pts.size() == 1) return (p - pts[0]).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    best = std::min(best, point_segment_distance(p, pts[i], pts[i + 1]));
  return best;
}

}  // namespace kinkopt::geom
