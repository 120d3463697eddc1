#include <cmath>
#include <random>

#include "doctest.h"
#include "kinkopt/pde.hpp"
#include "kinkopt/scenario.hpp"

using namespace kinkopt;
using mesh::NodalField;
using mesh::PolygonDomain;
using mesh::Vec2;
using pde::ControlProblem;
using pde::PiecewiseC2Coefficient;

namespace {

ControlProblem make_problem(const std::string& a0, const std::string& a1, double t_bar,
                            const std::string& b = "1") {
  ControlProblem p;
  p.b = expr::DiffExpr::build(b);
  p.a = PiecewiseC2Coefficient::make(a0, a1, t_bar);
  p.L = expr::parse_expr("0.5*y^2");
  p.dL_dy = expr::parse_expr("y");
  p.d2L_dy2 = expr::parse_expr("1");
  p.nu = 1e-2;
  p.alpha = -100;
  p.beta = 100;
  return p;
}

double l2_error_vs(const NodalField& yh, const expr::DiffExpr& exact) {
  double e2 = mesh::integrate(*yh.mesh, [&](int t, const Vec2& q) {
    double d = yh.value_in_tri(t, q) - exact.eval({q.x(), q.y()});
    return d * d;
  });
  return std::sqrt(std::max(0.0, e2));
}

}  // namespace

TEST_CASE("kinked coefficient calculus") {
  // a(t) = |t - 1|: a0 = 1 - t, a1 = t - 1
  auto a = PiecewiseC2Coefficient::make("1-y", "y-1", 1.0);
  CHECK(a.sigma0 == doctest::Approx(2.0));
  CHECK(a.slope_jump == doctest::Approx(-2.0));  // a0'(1) - a1'(1) = -1 - 1
  CHECK(a.value(0.0) == doctest::Approx(1.0));
  CHECK(a.value(3.0) == doctest::Approx(2.0));
  CHECK(a.dir_deriv(1.0, 2.0) == doctest::Approx(2.0));
  CHECK(a.dir_deriv(1.0, -2.0) == doctest::Approx(2.0));
  CHECK(a.dir_deriv(1.0, 0.0) == doctest::Approx(0.0));
  CHECK(a.dir_deriv(0.0, 5.0) == doctest::Approx(-5.0));
  CHECK(a.classical_deriv(1.0) == 0.0);
  CHECK(a.classical_deriv(1.0 + 1e-10) == doctest::Approx(1.0));
  CHECK(a.second(1.0) == 0.0);

  auto smooth = PiecewiseC2Coefficient::make("y^2", "y^2", 10.0, 8.0, 12.0);
  CHECK(smooth.sigma0 == doctest::Approx(0.0));
  CHECK(smooth.second(2.0) == doctest::Approx(2.0));

  CHECK_THROWS_AS(PiecewiseC2Coefficient::make("y", "y+1", 0.0), pde::CoefficientError);
  CHECK_THROWS_AS(PiecewiseC2Coefficient::make("y", "y", 0.0), pde::CoefficientError);  // negative
}

TEST_CASE("linear_solve basics") {
  mesh::SparseOperator I;
  I.mat.resize(3, 3);
  I.mat.setIdentity();
  mesh::Vector b(3);
  b << 1, 2, 3;
  mesh::Vector x = pde::linear_solve(I, b);
  CHECK((x - b).norm() == doctest::Approx(0.0));

  mesh::SparseOperator A;
  A.mat.resize(2, 2);
  std::vector<Eigen::Triplet<double>> t = {{0, 0, 2}, {0, 1, 1}, {1, 0, 1}, {1, 1, 2}};
  A.mat.setFromTriplets(t.begin(), t.end());
  mesh::Vector rhs(2);
  rhs << 3, 3;
  mesh::Vector sol = pde::linear_solve(A, rhs, 1e-14);
  CHECK(sol[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol[1] == doctest::Approx(1.0).epsilon(1e-12));

  // nonsymmetric system from a drift operator (shifted to be nonsingular)
  auto m = mesh::build_mesh(PolygonDomain::unit_square(), 0.25);
  std::vector<Vec2> w(m->num_triangles(), Vec2(1.0, 0.0));
  mesh::SparseOperator D = mesh::assemble_drift(*m, w);
  mesh::SpMat id(m->num_vertices(), m->num_vertices());
  id.setIdentity();
  D.mat += id;
  mesh::Vector r(m->num_vertices());
  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  for (int i = 0; i < r.size(); ++i) r[i] = g(rng);
  mesh::Vector sol2 = pde::linear_solve(D, r, 1e-12);
  CHECK((D.mat * sol2 - r).norm() <= 1e-12 * r.norm());
}

TEST_CASE("solve_state: zero control, one iteration") {
  auto m = mesh::build_mesh(PolygonDomain::unit_square(), 0.25);
  auto p = make_problem("0.5-y", "y-0.5", 0.5);
  auto [y, stats] = pde::solve_state(p, m, NodalField::zero(m));
  CHECK(stats.converged);
  CHECK(stats.iterations == 1);
  CHECK(y.max_abs() == 0.0);
}

TEST_CASE("manufactured smooth state: order >= 1.8 over 3 levels") {
  auto p = make_problem("y^2", "y^2", 10.0);
  expr::DiffExpr y_star = expr::DiffExpr::build("sin(pi*x1)*sin(pi*x2)");
  auto rhs = scenario::manufactured_rhs(p, y_star);
  std::vector<double> errors, hs;
  auto m = mesh::build_mesh(PolygonDomain::unit_square(), 0.25);
  for (int level = 0; level < 3; ++level) {
    auto [y, stats] = pde::solve_state_load(p, m, rhs, 1e-11, 200);
    REQUIRE(stats.converged);
    errors.push_back(l2_error_vs(y, y_star));
    hs.push_back(m->h_max);
    m = mesh::refine(*m);
  }
  double slope = std::log(errors.front() / errors.back()) / std::log(hs.front() / hs.back());
  CHECK(slope >= 1.8);
}

TEST_CASE("manufactured kinked state: error decreases monotonically") {
  auto p = make_problem("0.5-y", "y-0.5", 0.5);
  expr::DiffExpr y_star = expr::DiffExpr::build("sin(pi*x1)*sin(pi*x2)");
  auto rhs = scenario::manufactured_rhs(p, y_star);
  std::vector<double> errors;
  auto m = mesh::build_mesh(PolygonDomain::unit_square(), 0.25);
  for (int level = 0; level < 4; ++level) {
    auto [y, stats] = pde::solve_state_load(p, m, rhs, 1e-11, 200);
    REQUIRE(stats.converged);
    errors.push_back(l2_error_vs(y, y_star));
    m = mesh::refine(*m);
  }
  CHECK(errors[1] < errors[0]);
  CHECK(errors[2] < errors[1]);
  CHECK(errors[3] < errors[2]);
}

TEST_CASE("solve_linearized: trivial cases and FD consistency") {
  auto m = mesh::build_mesh(PolygonDomain::unit_square(), 0.125);
  auto p = make_problem("0.5-y", "y-0.5", 0.5);
  expr::DiffExpr y_star = expr::DiffExpr::build("sin(pi*x1)*sin(pi*x2)");
  NodalField u = scenario::manufactured_control(p, m, y_star);
  auto [y, stats] = pde::solve_state(p, m, u, 1e-12, 300);
  REQUIRE(stats.converged);

  NodalField z0 = pde::solve_linearized(p, m, y, NodalField::zero(m));
  CHECK(z0.max_abs() <= 1e-14);

  // a == 0 reduces to the Poisson solve
  auto p0 = make_problem("0", "0", 0.0);
  NodalField v = NodalField::interpolate(m, [](const Vec2& q) {
    return std::sin(M_PI * q.x()) * std::sin(2 * M_PI * q.y());
  });
  auto [ylin, st2] = pde::solve_state(p0, m, v, 1e-12, 50);
  NodalField z = pde::solve_linearized(p0, m, NodalField::zero(m), v);
  CHECK((z.values - ylin.values).cwiseAbs().maxCoeff() <= 1e-10);

  // difference-quotient oracle on the smooth problem
  auto ps = make_problem("y^2", "y^2", 10.0);
  NodalField us = scenario::manufactured_control(ps, m, y_star);
  auto [ys, st3] = pde::solve_state(ps, m, us, 1e-13, 400);
  REQUIRE(st3.converged);
  NodalField zs = pde::solve_linearized(ps, m, ys, v);
  double prev = std::numeric_limits<double>::infinity();
  for (double s : {1e-2, 1e-3, 1e-4}) {
    NodalField u_pert(m, us.values + s * v.values);
    auto [ys2, st4] = pde::solve_state(ps, m, u_pert, 1e-13, 400, &ys);
    REQUIRE(st4.converged);
    NodalField quotient(m, (ys2.values - ys.values) / s - zs.values);
    double err = mesh::l2_norm(quotient);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("solve_adjoint: trivial cases and exact duality") {
  auto m = mesh::build_mesh(PolygonDomain::unit_square(), 0.125);
  auto p = make_problem("0.5-y", "y-0.5", 0.5);
  expr::DiffExpr y_star = expr::DiffExpr::build("sin(pi*x1)*sin(pi*x2)");
  NodalField u = scenario::manufactured_control(p, m, y_star);
  auto [y, stats] = pde::solve_state(p, m, u, 1e-11, 200);
  REQUIRE(stats.converged);

  NodalField phi0 = pde::solve_adjoint(p, m, y, NodalField::zero(m));
  CHECK(phi0.max_abs() <= 1e-14);

  std::mt19937 rng(11);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 10; ++rep) {
    mesh::Vector vv(m->num_vertices()), gg(m->num_vertices());
    for (int i = 0; i < vv.size(); ++i) {
      vv[i] = g(rng);
      gg[i] = g(rng);
    }
    NodalField v(m, std::move(vv)), w(m, std::move(gg));
    NodalField z = pde::solve_linearized(p, m, y, v, 1e-13);
    NodalField phi = pde::solve_adjoint(p, m, y, w, 1e-13);
    double lhs = mesh::l2_inner(z, w);
    double rhs = mesh::l2_inner(v, phi);
    double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-30});
    CHECK(std::abs(lhs - rhs) / scale <= 1e-8);
  }

  // a == 0: adjoint equals the Poisson solve
  auto p0 = make_problem("0", "0", 0.0);
  NodalField rhs_field = NodalField::interpolate(m, [](const Vec2& q) {
    return q.x() * (1 - q.x()) * q.y() * (1 - q.y());
  });
  NodalField phi = pde::solve_adjoint(p0, m, NodalField::zero(m), rhs_field);
  auto [ypois, st] = pde::solve_state(p0, m, rhs_field, 1e-12, 50);
  CHECK((phi.values - ypois.values).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("discrete maximum principle and energy identity") {
  auto m = mesh::build_mesh(PolygonDomain::unit_square(), 0.125);
  auto p = make_problem("0.5-y", "y-0.5", 0.5);
  NodalField u = NodalField::interpolate(m, [](const Vec2& q) {
    return 4.0 + std::sin(3 * q.x()) + q.y();  // strictly positive
  });
  auto [y, stats] = pde::solve_state(p, m, u, 1e-11, 200);
  REQUIRE(stats.converged);
  CHECK(y.values.minCoeff() >= -1e-10);

  auto coeff = pde::diffusion_coefficient(p, *m, y);
  auto A = mesh::assemble_weighted_stiffness(*m, coeff);
  double energy = A.quadratic_form(y.values, y.values);
  double work = mesh::l2_inner(u, y);
  CHECK(std::abs(energy - work) / std::max(std::abs(work), 1e-30) <= 1e-8);
}

TEST_CASE("state positivity violation is flagged") {
  auto m = mesh::build_mesh(PolygonDomain::unit_square(), 0.5);
  ControlProblem p = make_problem("0", "0", 0.0, "x1-0.5");  // b changes sign
  CHECK_THROWS_AS(pde::solve_state(p, m, NodalField::zero(m)), pde::CoefficientError);
}
