#include "kinkopt/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace kinkopt::levelset {

namespace {

using geom::AffineFn;

using EdgeKey = std::pair<int, int>;

EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

struct Segment {
  int tri = -1;
  EdgeKey entry_edge, exit_edge;
  Vec2 entry, exit;
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

LevelSetDecomposition extract_level_set(const NodalField& y, double t) {
  const TriMesh& m = *y.mesh;
  LevelSetDecomposition dec;
  dec.level = t;
  dec.field = y;

  // symbolic perturbation of exact hits
  const double eps = 1e-13 * std::max(y.max_abs(), std::abs(t));
  mesh::Vector w = y.values.array() - t;
  for (int i = 0; i < w.size(); ++i)
    if (w[i] == 0.0) w[i] = (eps > 0.0 ? eps : 1e-300);

  auto crossing = [&](int a, int b) {
    double s = w[a] / (w[a] - w[b]);
    return Vec2(m.vertices[a] + s * (m.vertices[b] - m.vertices[a]));
  };

  std::vector<Segment> segs;
  segs.reserve(64);
  for (int tri = 0; tri < m.num_triangles(); ++tri) {
    const auto& tr = m.triangles[tri];
    int pos = 0;
    for (int k = 0; k < 3; ++k) pos += (w[tr[k]] > 0.0);
    if (pos == 0 || pos == 3) continue;

    std::array<std::pair<EdgeKey, Vec2>, 2> cross;
    int nc = 0;
    for (int k = 0; k < 3; ++k) {
      int a = tr[k], b = tr[(k + 1) % 3];
      if ((w[a] > 0.0) != (w[b] > 0.0)) cross[nc++] = {edge_key(a, b), crossing(a, b)};
    }
    Segment s;
    s.tri = tri;
    s.entry_edge = cross[0].first;
    s.entry = cross[0].second;
    s.exit_edge = cross[1].first;
    s.exit = cross[1].second;
    // orient so {y > t} lies to the left; the perturbed per-triangle gradient
    // is exactly normal to the segment
    auto [p0, p1, p2] = m.tri_points(tri);
    AffineFn lw = AffineFn::from_triangle(p0, p1, p2, w[tr[0]], w[tr[1]], w[tr[2]]);
    Vec2 d = s.exit - s.entry;
    if (lw.g.dot(Vec2(-d.y(), d.x())) < 0.0) {
      std::swap(s.entry, s.exit);
      std::swap(s.entry_edge, s.exit_edge);
    }
    segs.push_back(std::move(s));
  }

  // edge -> segments touching it; interior crossed edges host exactly two
  std::map<EdgeKey, std::vector<int>> by_edge;
  for (int i = 0; i < static_cast<int>(segs.size()); ++i) {
    by_edge[segs[i].entry_edge].push_back(i);
    by_edge[segs[i].exit_edge].push_back(i);
  }

  std::vector<char> used(segs.size(), 0);
  auto next_of = [&](int si) -> int {
    const auto& lst = by_edge[segs[si].exit_edge];
    for (int other : lst)
      if (other != si && !used[other] && segs[other].entry_edge == segs[si].exit_edge)
        return other;
    return -1;
  };

  auto walk = [&](int start, bool closed) {
    LevelCurve c;
    c.closed = closed;
    c.min_grad = std::numeric_limits<double>::infinity();
    c.points.push_back(segs[start].entry);
    int si = start;
    while (si >= 0 && !used[si]) {
      used[si] = 1;
      c.points.push_back(segs[si].exit);
      c.seg_tri.push_back(segs[si].tri);
      c.length += (segs[si].exit - segs[si].entry).norm();
      c.min_grad = std::min(c.min_grad, y.gradient(segs[si].tri).norm());
      si = next_of(si);
    }
    return c;
  };

  // open components first, started at boundary entry edges in key order
  for (const auto& [key, lst] : by_edge) {
    if (lst.size() != 1) continue;
    int si = lst[0];
    if (used[si] || segs[si].entry_edge != key) continue;
    dec.components.push_back(walk(si, false));
  }
  // remaining segments form cycles
  for (int si = 0; si < static_cast<int>(segs.size()); ++si) {
    if (used[si]) continue;
    dec.components.push_back(walk(si, true));
  }
  return dec;
}

double curve_integral(const LevelCurve& curve,
                      const std::function<double(int, const Vec2&)>& f) {
  static const double g = 0.5 / std::sqrt(3.0);
  double sum = 0.0;
  for (int i = 0; i < curve.num_segments(); ++i) {
    const Vec2& a = curve.points[i];
    const Vec2& b = curve.points[i + 1];
    Vec2 mid = 0.5 * (a + b);
    Vec2 half = g * (b - a);
    double len = (b - a).norm();
    int tri = curve.seg_tri[i];
    double v = f(tri, Vec2(mid - half)) + f(tri, Vec2(mid + half));
    if (!std::isfinite(v)) throw LevelSetError("non-finite integrand on level curve");
    sum += 0.5 * len * v;
  }
  return sum;
}

double curve_integral(const LevelCurve& curve, const std::function<double(const Vec2&)>& f) {
  return curve_integral(curve, [&](int, const Vec2& p) { return f(p); });
}

namespace {

/// Sign of (y - t) on the enclosed side of a closed component; open curves
/// have no enclosed side, the {y < t} side plays that role.
int inside_sign(const LevelCurve& c) {
  if (!c.closed) return -1;
  // orientation puts {y > t} on the left; a CCW polyline encloses its left
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < c.points.size(); ++i)
    area += c.points[i].x() * c.points[i + 1].y() - c.points[i + 1].x() * c.points[i].y();
  return area > 0.0 ? +1 : -1;
}

}  // namespace

NeighborhoodClass classify_neighborhood(const NodalField& y, const LevelSetDecomposition& dec,
                                        int component_index, double epsilon) {
  if (epsilon <= 0.0) throw LevelSetError("epsilon must be positive");
  if (component_index < 0 || component_index >= static_cast<int>(dec.components.size()))
    throw LevelSetError("component index out of range");
  const TriMesh& m = *y.mesh;
  const LevelCurve& comp = dec.components[component_index];
  const int sign_in = inside_sign(comp);

  NeighborhoodClass out;
  out.epsilon = epsilon;
  out.inside_band.assign(m.num_triangles(), 0);
  out.outside_band.assign(m.num_triangles(), 0);

  for (int t = 0; t < m.num_triangles(); ++t) {
    const Vec2& c = m.tri_centroid[t];
    double d = geom::point_polyline_distance(c, comp.points);
    if (d >= epsilon) continue;
    for (int k = 0; k < static_cast<int>(dec.components.size()); ++k) {
      if (k == component_index) continue;
      if (geom::point_polyline_distance(c, dec.components[k].points) < epsilon)
        throw LevelSetError("epsilon-bands of components " + std::to_string(component_index) +
                            " and " + std::to_string(k) + " overlap");
    }
    if (d <= 1e-15) continue;  // centroid on the curve: neither band
    double side = y.value_in_tri(t, c) - dec.level;
    if ((side > 0.0 ? +1 : -1) == sign_in)
      out.inside_band[t] = 1;
    else
      out.outside_band[t] = 1;
  }
  return out;
}

namespace {

std::vector<Vec2> curve_samples(const LevelCurve& c) {
  std::vector<Vec2> pts = c.points;
  for (std::size_t i = 0; i + 1 < c.points.size(); ++i)
    pts.push_back(0.5 * (c.points[i] + c.points[i + 1]));
  return pts;
}

}  // namespace

TrackingReport component_tracking(const NodalField& y, const NodalField& y_n, double t,
                                  double epsilon, int component_index) {
  LevelSetDecomposition base = extract_level_set(y, t);
  if (component_index < 0 || component_index >= static_cast<int>(base.components.size()))
    throw LevelSetError("component index out of range");
  const LevelCurve& C = base.components[component_index];

  LevelSetDecomposition pert = extract_level_set(y_n, t);
  TrackingReport rep;
  std::vector<const LevelCurve*> found;
  for (const LevelCurve& cn : pert.components) {
    bool touches = false;
    for (const Vec2& p : curve_samples(cn)) {
      if (geom::point_polyline_distance(p, C.points) < epsilon) {
        touches = true;
        break;
      }
    }
    if (touches) {
      found.push_back(&cn);
      ++rep.count_in_band;
    }
  }
  if (found.empty()) {
    rep.hausdorff = std::numeric_limits<double>::infinity();
    return rep;
  }
  double h = 0.0;
  for (const LevelCurve* cn : found)
    for (const Vec2& p : curve_samples(*cn))
      h = std::max(h, geom::point_polyline_distance(p, C.points));
  for (const Vec2& p : curve_samples(C)) {
    double best = std::numeric_limits<double>::infinity();
    for (const LevelCurve* cn : found)
      best = std::min(best, geom::point_polyline_distance(p, cn->points));
    h = std::max(h, best);
  }
  rep.hausdorff = h;
  return rep;
}

JumpEstimate jump_functional(const NodalField& y, double t_bar, double sigma0,
                             const std::vector<double>& r_list) {
  for (std::size_t i = 0; i < r_list.size(); ++i) {
    if (r_list[i] <= 0.0) throw LevelSetError("r_list entries must be positive");
    if (i > 0 && r_list[i] >= r_list[i - 1])
      throw LevelSetError("r_list must be strictly decreasing");
  }
  const TriMesh& m = *y.mesh;
  JumpEstimate est;
  est.r_values = r_list;
  for (double r : r_list) {
    double total = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) {
      const auto& tr = m.triangles[t];
      double v0 = y.values[tr[0]] - t_bar, v1 = y.values[tr[1]] - t_bar,
             v2 = y.values[tr[2]] - t_bar;
      double lo = std::min({v0, v1, v2}), hi = std::max({v0, v1, v2});
      if (lo > r || hi < -r) continue;
      Vec2 g = y.gradient(t);
      double weight = std::abs(g.x()) + std::abs(g.y());
      if (weight == 0.0) continue;  // flat patch: integrand vanishes
      double area;
      if (lo >= -r && hi <= r) {
        area = m.tri_area[t];
      } else {
        auto [p0, p1, p2] = m.tri_points(t);
        geom::Polygon poly = {p0, p1, p2};
        AffineFn f = AffineFn::from_triangle(p0, p1, p2, v0, v1, v2);
        // {f <= r} then {f >= -r}
        poly = geom::clip_half_plane(poly, AffineFn{r - f.c0, -f.g});
        poly = geom::clip_half_plane(poly, AffineFn{f.c0 + r, f.g});
        area = std::abs(geom::polygon_area(poly));
      }
      total += weight * area;
    }
    est.estimates.push_back(sigma0 * total / r);
  }
  if (est.estimates.size() >= 2) {
    double r1 = r_list[r_list.size() - 2], e1 = est.estimates[est.estimates.size() - 2];
    double r2 = r_list.back(), e2 = est.estimates.back();
    est.extrapolated = (r1 * e2 - r2 * e1) / (r1 - r2);
  } else if (!est.estimates.empty()) {
    est.extrapolated = est.estimates.back();
  }
  return est;
}

CurveProjection project_to_curve(const Vec2& p, const LevelCurve& curve, const NodalField& y) {
  if (curve.points.size() < 2) throw LevelSetError("empty curve");
  CurveProjection proj;
  double best = std::numeric_limits<double>::infinity();
  int best_seg = 0;
  for (int i = 0; i < curve.num_segments(); ++i) {
    Vec2 q = geom::closest_point_on_segment(p, curve.points[i], curve.points[i + 1]);
    double d = (p - q).norm();
    if (d < best) {
      best = d;
      proj.foot = q;
      best_seg = i;
    }
  }
  proj.distance = best;
  if (best <= 1e-14) {
    proj.collinearity_residual = 0.0;
    return proj;
  }
  Vec2 u = (p - proj.foot).normalized();
  Vec2 g = y.gradient(curve.seg_tri[best_seg]);
  double gn = g.norm();
  if (gn == 0.0) {
    proj.collinearity_residual = 1.0;
    return proj;
  }
  g /= gn;
  proj.collinearity_residual = std::abs(u.x() * g.y() - u.y() * g.x());
  return proj;
}

std::string decomposition_to_json(const LevelSetDecomposition& dec) {
  std::ostringstream os;
  os << "{\"t\":" << fmt_double(dec.level) << ",\"components\":[";
  for (std::size_t k = 0; k < dec.components.size(); ++k) {
    const LevelCurve& c = dec.components[k];
    if (k) os << ",";
    os << "{\"closed\":" << (c.closed ? "true" : "false") << ",\"points\":[";
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      if (i) os << ",";
      os << "[" << fmt_double(c.points[i].x()) << "," << fmt_double(c.points[i].y()) << "]";
    }
    os << "],\"length\":" << fmt_double(c.length) << ",\"min_grad\":" << fmt_double(c.min_grad)
       << "}";
  }
  os << "]}";
  return os.str();
}

}  // namespace kinkopt::levelset
