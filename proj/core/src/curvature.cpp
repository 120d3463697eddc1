#include "kinkopt/curvature.hpp"

#include <cmath>

namespace kinkopt::curvature {

namespace {

using geom::AffineFn;
using geom::Polygon;

constexpr double kIndicatorTol = 1e-14;

AffineFn tri_affine(const TriMesh& m, const NodalField& f, int t, double shift) {
  const auto& tr = m.triangles[t];
  auto [p0, p1, p2] = m.tri_points(t);
  return AffineFn::from_triangle(p0, p1, p2, f.values[tr[0]] - shift, f.values[tr[1]] - shift,
                                 f.values[tr[2]] - shift);
}

}  // namespace

GradField GradField::from_nodal(const NodalField& f) {
  GradField g;
  g.grad = [f](int tri, const Vec2&) { return f.gradient(tri); };
  return g;
}

GradField GradField::from_diff_expr(const expr::DiffExpr& f) {
  GradField g;
  g.grad = [f](int, const Vec2& p) {
    return Vec2(f.grad1({p.x(), p.y()}), f.grad2({p.x(), p.y()}));
  };
  return g;
}

double compute_Qs_with(const ControlProblem& p, const NodalField& y, const NodalField& phi,
                       const NodalField& v1, const NodalField& v2, const NodalField& z1,
                       const NodalField& z2) {
  const TriMesh& m = *y.mesh;
  const double t_bar = p.a.t_bar;
  double hess_term = mesh::integrate(m, [&](int t, const Vec2& q) {
    double yv = y.value_in_tri(t, q);
    return p.eval_L_yy(q, yv) * z1.value_in_tri(t, q) * z2.value_in_tri(t, q);
  });
  double tikhonov = mesh::l2_inner(v1, v2);
  double app_term = mesh::integrate(m, [&](int t, const Vec2& q) {
    double yv = y.value_in_tri(t, q);
    if (std::abs(yv - t_bar) <= kIndicatorTol) return 0.0;
    double gdot = y.gradient(t).dot(phi.gradient(t));
    return p.a.second(yv) * z1.value_in_tri(t, q) * z2.value_in_tri(t, q) * gdot;
  });
  return 0.5 * hess_term + 0.5 * p.nu * tikhonov - 0.5 * app_term;
}

double compute_Q1_with(const ControlProblem& p, const NodalField& y, const NodalField& phi,
                       const NodalField& z1, const NodalField& z2) {
  const TriMesh& m = *y.mesh;
  double val = mesh::integrate(m, [&](int t, const Vec2& q) {
    double yv = y.value_in_tri(t, q);
    Vec2 gphi = phi.gradient(t);
    double d1 = p.a.dir_deriv(yv, z1.value_in_tri(t, q));
    double d2 = p.a.dir_deriv(yv, z2.value_in_tri(t, q));
    return d1 * z2.gradient(t).dot(gphi) + d2 * z1.gradient(t).dot(gphi);
  });
  return -0.5 * val;
}

double compute_Qs(const ControlProblem& p, const NodalField& y, const NodalField& phi,
                  const NodalField& v1, const NodalField& v2, double tol) {
  NodalField z1 = pde::solve_linearized(p, y.mesh, y, v1, tol);
  NodalField z2 = pde::solve_linearized(p, y.mesh, y, v2, tol);
  return compute_Qs_with(p, y, phi, v1, v2, z1, z2);
}

double compute_Q1(const ControlProblem& p, const NodalField& y, const NodalField& phi,
                  const NodalField& v1, const NodalField& v2, double tol) {
  NodalField z1 = pde::solve_linearized(p, y.mesh, y, v1, tol);
  NodalField z2 = pde::solve_linearized(p, y.mesh, y, v2, tol);
  return compute_Q1_with(p, y, phi, z1, z2);
}

std::pair<double, Q2Detail> compute_Q2_explicit(const ControlProblem& p, const NodalField& y_bar,
                                                const GradField& phi, const NodalField& z_v,
                                                double theta_grad) {
  Q2Detail detail;
  auto dec = levelset::extract_level_set(y_bar, p.a.t_bar);
  if (dec.empty()) {
    detail.empty_levelset = true;
    return {0.0, detail};
  }
  double q2 = 0.0;
  for (int k = 0; k < static_cast<int>(dec.components.size()); ++k) {
    const auto& comp = dec.components[k];
    if (comp.min_grad < theta_grad) {
      detail.filtered_components.push_back(k);
      detail.component_contributions.push_back(0.0);
      continue;
    }
    double line = levelset::curve_integral(comp, [&](int tri, const Vec2& q) {
      Vec2 gy = y_bar.gradient(tri);
      double z = z_v.value_in_tri(tri, q);
      return z * z * gy.dot(phi.grad(tri, q)) / gy.norm();
    });
    double contrib = 0.5 * p.a.slope_jump * line;
    detail.component_contributions.push_back(contrib);
    q2 += contrib;
  }
  return {q2, detail};
}

CurvatureReport compute_Q_total(const ControlProblem& p, MeshPtr m, const NodalField& u_bar,
                                const NodalField& v, double theta_grad, double tol,
                                double state_tol, int state_max_iter) {
  auto [y, stats] = pde::solve_state(p, m, u_bar, state_tol, state_max_iter);
  if (!stats.converged) throw pde::SolveError("compute_Q_total: state solve did not converge");
  NodalField phi = pde::solve_adjoint(
      p, m, y, [&](int t, const Vec2& q) { return p.eval_L_y(q, y.value_in_tri(t, q)); }, tol);
  NodalField z = pde::solve_linearized(p, m, y, v, tol);

  CurvatureReport rep;
  rep.q_s = compute_Qs_with(p, y, phi, v, v, z, z);
  rep.q_1 = compute_Q1_with(p, y, phi, z, z);
  auto [q2, detail] = compute_Q2_explicit(p, y, GradField::from_nodal(phi), z, theta_grad);
  rep.q_2 = q2;
  rep.detail = std::move(detail);
  rep.total = rep.q_s + rep.q_1 + rep.q_2;
  return rep;
}

namespace {

enum class BandFactor { PerturbedDeficit, BaseDeficit, Combined };

/// integral over Omega^2 minus Omega^3 of factor * grad(y_bar).grad(phi),
/// with Omega^2 = {y_bar in (t,t+delta), y_n in (t-delta,t]} and Omega^3 its
/// mirror, clipped exactly per triangle (both constraints are affine there).
double band_integral(const NodalField& y_bar, const NodalField& y_n, double t_bar, double delta,
                     const GradField& phi, BandFactor factor,
                     const std::vector<std::uint8_t>* tri_mask) {
  const TriMesh& m = *y_bar.mesh;
  double total = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    if (tri_mask && !(*tri_mask)[t]) continue;
    const auto& tr = m.triangles[t];
    double b0 = y_bar.values[tr[0]] - t_bar, b1 = y_bar.values[tr[1]] - t_bar,
           b2 = y_bar.values[tr[2]] - t_bar;
    double n0 = y_n.values[tr[0]] - t_bar, n1 = y_n.values[tr[1]] - t_bar,
           n2 = y_n.values[tr[2]] - t_bar;
    double blo = std::min({b0, b1, b2}), bhi = std::max({b0, b1, b2});
    double nlo = std::min({n0, n1, n2}), nhi = std::max({n0, n1, n2});
    // Omega^2 needs y_bar > t and y_n <= t somewhere; Omega^3 the reverse
    bool may2 = bhi > 0.0 && blo < delta && nlo <= 0.0 && nhi > -delta;
    bool may3 = blo < 0.0 && bhi > -delta && nhi >= 0.0 && nlo < delta;
    if (!may2 && !may3) continue;

    auto [p0, p1, p2] = m.tri_points(t);
    AffineFn A = AffineFn::from_triangle(p0, p1, p2, b0, b1, b2);
    AffineFn B = AffineFn::from_triangle(p0, p1, p2, n0, n1, n2);
    Vec2 gy = y_bar.gradient(t);
    auto integrand = [&](const Vec2& q) {
      double f = 0.0;
      switch (factor) {
        case BandFactor::PerturbedDeficit: f = -B(q); break;
        case BandFactor::BaseDeficit: f = -A(q); break;
        case BandFactor::Combined: f = -A(q) - B(q); break;
      }
      return f * gy.dot(phi.grad(t, q));
    };

    Polygon base = {p0, p1, p2};
    if (may2) {
      Polygon r = geom::clip_half_plane(base, A);                              // y_bar > t
      r = geom::clip_half_plane(r, AffineFn{delta - A.c0, -A.g});              // y_bar < t+delta
      r = geom::clip_half_plane(r, AffineFn{-B.c0, -B.g});                     // y_n <= t
      r = geom::clip_half_plane(r, AffineFn{B.c0 + delta, B.g});               // y_n > t-delta
      if (!r.empty()) total += geom::integrate_polygon(r, integrand);
    }
    if (may3) {
      Polygon r = geom::clip_half_plane(base, AffineFn{-A.c0, -A.g});          // y_bar < t
      r = geom::clip_half_plane(r, AffineFn{A.c0 + delta, A.g});               // y_bar > t-delta
      r = geom::clip_half_plane(r, B);                                         // y_n >= t
      r = geom::clip_half_plane(r, AffineFn{delta - B.c0, -B.g});              // y_n < t+delta
      if (!r.empty()) total -= geom::integrate_polygon(r, integrand);
    }
  }
  return total;
}

void check_s_list(const std::vector<double>& s_list) {
  if (s_list.empty()) throw levelset::LevelSetError("s_list must be nonempty");
  for (std::size_t i = 0; i < s_list.size(); ++i) {
    if (s_list[i] <= 0.0) throw levelset::LevelSetError("s_list entries must be positive");
    if (i > 0 && s_list[i] >= s_list[i - 1])
      throw levelset::LevelSetError("s_list must be strictly decreasing");
  }
}

LimitExperiment run_experiment(const NodalField& y_bar, const NodalField& w, const GradField& phi,
                               double t_bar, int component_index, double epsilon,
                               const std::vector<double>& s_list, double theta_grad, double delta,
                               BandFactor factor, double target_sign) {
  check_s_list(s_list);
  const TriMesh& m = *y_bar.mesh;
  for (int i = 0; i < m.num_vertices(); ++i)
    if (m.boundary_vertex[i] && std::abs(w.values[i]) > 1e-12 * std::max(1.0, w.max_abs()))
      throw levelset::LevelSetError("perturbation field w must vanish on the boundary");

  auto dec = levelset::extract_level_set(y_bar, t_bar);
  if (component_index < 0 || component_index >= static_cast<int>(dec.components.size()))
    throw levelset::LevelSetError("component index out of range");
  const auto& comp = dec.components[component_index];

  LimitExperiment ex;
  ex.s_list = s_list;
  if (comp.min_grad >= theta_grad) {
    double line = levelset::curve_integral(comp, [&](int tri, const Vec2& q) {
      Vec2 gy = y_bar.gradient(tri);
      double wv = w.value_in_tri(tri, q);
      return wv * wv * gy.dot(phi.grad(tri, q)) / gy.norm();
    });
    ex.target = target_sign * 0.5 * line;
  } else {
    ex.target = 0.0;  // vanishing-gradient cases: the limit is zero
  }

  std::vector<std::uint8_t> mask(m.num_triangles(), 0);
  for (int t = 0; t < m.num_triangles(); ++t)
    mask[t] = geom::point_polyline_distance(m.tri_centroid[t], comp.points) < epsilon;

  if (delta <= 0.0) delta = 10.0 * s_list.front();
  for (double s : s_list) {
    NodalField y_n(y_bar.mesh, y_bar.values + s * w.values);
    double a_n = band_integral(y_bar, y_n, t_bar, delta, phi, factor, &mask);
    ex.values.push_back(a_n / (s * s));
    ex.errors.push_back(std::abs(ex.values.back() - ex.target));
  }
  return ex;
}

}  // namespace

LimitExperiment an_experiment(const NodalField& y_bar, const NodalField& w, const GradField& phi,
                              double t_bar, int component_index, double epsilon,
                              const std::vector<double>& s_list, double theta_grad, double delta) {
  return run_experiment(y_bar, w, phi, t_bar, component_index, epsilon, s_list, theta_grad, delta,
                        BandFactor::PerturbedDeficit, +1.0);
}

LimitExperiment an_tilde_experiment(const NodalField& y_bar, const NodalField& w,
                                    const GradField& phi, double t_bar, int component_index,
                                    double epsilon, const std::vector<double>& s_list,
                                    double theta_grad, double delta) {
  return run_experiment(y_bar, w, phi, t_bar, component_index, epsilon, s_list, theta_grad, delta,
                        BandFactor::BaseDeficit, -1.0);
}

LimitExperiment combined_limit(const NodalField& y_bar, const NodalField& w, const GradField& phi,
                               double t_bar, int component_index, double epsilon,
                               const std::vector<double>& s_list, double theta_grad,
                               double delta) {
  return run_experiment(y_bar, w, phi, t_bar, component_index, epsilon, s_list, theta_grad, delta,
                        BandFactor::Combined, 0.0);
}

Q2PathEstimate q2_liminf_estimate(const ControlProblem& p, MeshPtr m, const NodalField& u_bar,
                                  const NodalField& v, const std::vector<double>& s_list,
                                  double tol, double state_tol, int state_max_iter,
                                  double delta) {
  check_s_list(s_list);
  auto [y_bar, stats] = pde::solve_state(p, m, u_bar, state_tol, state_max_iter);
  if (!stats.converged)
    throw pde::SolveError("q2_liminf_estimate: base state solve did not converge");
  NodalField phi = pde::solve_adjoint(
      p, m, y_bar, [&](int t, const Vec2& q) { return p.eval_L_y(q, y_bar.value_in_tri(t, q)); },
      tol);
  GradField gphi = GradField::from_nodal(phi);
  if (delta <= 0.0) delta = 10.0 * s_list.front();

  Q2PathEstimate est;
  est.s_list = s_list;
  for (double s : s_list) {
    NodalField u_s(m, u_bar.values + s * v.values);
    auto [y_s, st] = pde::solve_state(p, m, u_s, state_tol, state_max_iter, &y_bar);
    if (!st.converged)
      throw pde::SolveError("q2_liminf_estimate: state solve at s=" + std::to_string(s) +
                            " did not converge");
    double band =
        band_integral(y_bar, y_s, p.a.t_bar, delta, gphi, BandFactor::PerturbedDeficit, nullptr);
    est.values.push_back(p.a.slope_jump * band / (s * s));
  }
  est.final_value = est.values.back();
  return est;
}

}  // namespace kinkopt::curvature
