#include "kinkopt/green.hpp"

#include <cmath>

namespace kinkopt::green {

namespace {

using geom::AffineFn;

AffineFn tri_affine(const TriMesh& m, const NodalField& f, int t, double shift) {
  const auto& tr = m.triangles[t];
  auto [p0, p1, p2] = m.tri_points(t);
  return AffineFn::from_triangle(p0, p1, p2, f.values[tr[0]] - shift, f.values[tr[1]] - shift,
                                 f.values[tr[2]] - shift);
}

AffineFn negate(const AffineFn& l) { return AffineFn{-l.c0, -l.g}; }

}  // namespace

double RegionIndicator::area_plus() const {
  double a = 0.0;
  for (const auto& p : pieces)
    if (p.sign > 0) a += std::abs(geom::polygon_area(p.polygon));
  return a;
}

double RegionIndicator::area_minus() const {
  double a = 0.0;
  for (const auto& p : pieces)
    if (p.sign < 0) a += std::abs(geom::polygon_area(p.polygon));
  return a;
}

double RegionIndicator::signed_integral(const std::function<double(int, const Vec2&)>& f) const {
  double s = 0.0;
  for (const auto& p : pieces) {
    int tri = p.tri;
    s += p.sign * geom::integrate_polygon(p.polygon, [&](const Vec2& q) { return f(tri, q); });
  }
  return s;
}

RegionIndicator region_split(const NodalField& y1, const NodalField& y2, double t,
                             const Polygon* window) {
  if (y1.mesh.get() != y2.mesh.get())
    throw GreenError("region_split: fields live on different meshes");
  const TriMesh& m = *y1.mesh;
  RegionIndicator out;
  const double piece_tol = 1e-12;

  for (int tri = 0; tri < m.num_triangles(); ++tri) {
    auto [p0, p1, p2] = m.tri_points(tri);
    Polygon base = {p0, p1, p2};
    if (window) {
      for (std::size_t i = 0; i < window->size() && !base.empty(); ++i) {
        const Vec2& a = (*window)[i];
        const Vec2& b = (*window)[(i + 1) % window->size()];
        base = geom::clip_segment_line(base, a, b, true);
      }
      if (base.empty()) continue;
    }
    AffineFn l1 = tri_affine(m, y1, tri, t);
    AffineFn l2 = tri_affine(m, y2, tri, t);

    Polygon plus = geom::clip_half_plane(base, l1);          // y1 > t
    plus = geom::clip_half_plane(plus, negate(l2));          // y2 < t
    if (!plus.empty() && std::abs(geom::polygon_area(plus)) > piece_tol * m.tri_area[tri])
      out.pieces.push_back({tri, +1, std::move(plus)});

    Polygon minus = geom::clip_half_plane(base, negate(l1));  // y1 < t
    minus = geom::clip_half_plane(minus, l2);                 // y2 > t
    if (!minus.empty() && std::abs(geom::polygon_area(minus)) > piece_tol * m.tri_area[tri])
      out.pieces.push_back({tri, -1, std::move(minus)});
  }
  return out;
}

PointField PointField::from_nodal(const NodalField& f) {
  PointField pf;
  pf.value = [f](int tri, const Vec2& p) { return f.value_in_tri(tri, p); };
  pf.grad = [f](int tri, const Vec2&) { return f.gradient(tri); };
  return pf;
}

PointField PointField::from_diff_expr(const expr::DiffExpr& f) {
  PointField pf;
  pf.value = [f](int, const Vec2& p) { return f.eval({p.x(), p.y()}); };
  pf.grad = [f](int, const Vec2& p) {
    return Vec2(f.grad1({p.x(), p.y()}), f.grad2({p.x(), p.y()}));
  };
  return pf;
}

namespace {

bool midpoint_in_window(const Polygon& window, const Vec2& p) {
  for (std::size_t i = 0; i < window.size(); ++i) {
    const Vec2& a = window[i];
    const Vec2& b = window[(i + 1) % window.size()];
    Vec2 e = b - a;
    if (e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x()) < 0.0) return false;
  }
  return true;
}

double boundary_term(const NodalField& yj, const levelset::LevelSetDecomposition& dec,
                     const PointField& v, const expr::DiffExpr& phi, double theta_grad,
                     const Polygon* window) {
  double total = 0.0;
  for (const auto& comp : dec.components) {
    if (comp.min_grad < theta_grad)
      throw GreenError("level curve has |grad y| = " + std::to_string(comp.min_grad) +
                       " below theta_grad = " + std::to_string(theta_grad));
    for (int i = 0; i < comp.num_segments(); ++i) {
      const Vec2& a = comp.points[i];
      const Vec2& b = comp.points[i + 1];
      if (window && !midpoint_in_window(*window, Vec2(0.5 * (a + b)))) continue;
      int tri = comp.seg_tri[i];
      Vec2 n = yj.gradient(tri);
      n /= n.norm();
      static const double g = 0.5 / std::sqrt(3.0);
      Vec2 mid = 0.5 * (a + b);
      Vec2 half = g * (b - a);
      double len = (b - a).norm();
      auto f = [&](const Vec2& q) {
        Vec2 gp(phi.grad1({q.x(), q.y()}), phi.grad2({q.x(), q.y()}));
        return v.value(tri, q) * gp.dot(n);
      };
      total += 0.5 * len * (f(Vec2(mid - half)) + f(Vec2(mid + half)));
    }
  }
  return total;
}

}  // namespace

GreenResult green_residual(const NodalField& y1, const NodalField& y2, double t,
                           const PointField& v, const expr::DiffExpr& phi, double theta_grad,
                           const Polygon* window) {
  RegionIndicator regions = region_split(y1, y2, t, window);

  auto dec1 = levelset::extract_level_set(y1, t);
  auto dec2 = levelset::extract_level_set(y2, t);
  auto count_in_window = [&](const levelset::LevelSetDecomposition& d) {
    if (!window) return static_cast<int>(d.components.size());
    int n = 0;
    for (const auto& c : d.components)
      for (const auto& p : c.points)
        if (midpoint_in_window(*window, p)) {
          ++n;
          break;
        }
    return n;
  };
  if (count_in_window(dec1) > 1 || count_in_window(dec2) > 1)
    throw GreenError("window must contain a single level-curve component per field");

  GreenResult res;
  res.lhs = regions.signed_integral([&](int tri, const Vec2& p) {
    Vec2 gp(phi.grad1({p.x(), p.y()}), phi.grad2({p.x(), p.y()}));
    return v.grad(tri, p).dot(gp);
  });

  double area_term = -regions.signed_integral([&](int tri, const Vec2& p) {
    return v.value(tri, p) * phi.laplacian_at({p.x(), p.y()});
  });
  double c1 = boundary_term(y1, dec1, v, phi, theta_grad, window);
  double c2 = boundary_term(y2, dec2, v, phi, theta_grad, window);
  res.rhs = area_term - c1 + c2;
  res.residual = std::abs(res.lhs - res.rhs);
  return res;
}

}  // namespace kinkopt::green
