#include <cmath>

#include "doctest.h"
#include "kinkopt/levelset.hpp"
#include "support/contour_oracle.hpp"

using namespace kinkopt;
using mesh::NodalField;
using mesh::PolygonDomain;
using mesh::Vec2;
using testing::ContourOracle;

namespace {

mesh::MeshPtr square_mesh(double h) {
  return mesh::build_mesh(PolygonDomain::unit_square(), h);
}

mesh::MeshPtr radial_mesh(double h) {
  return mesh::build_mesh(PolygonDomain::rectangle({-1, -1}, {1, 1}), h);
}

NodalField radial_nodal(mesh::MeshPtr m) {
  return NodalField::interpolate(std::move(m), testing::radial_field);
}

}  // namespace

TEST_CASE("vertical line level set of x1") {
  auto m = square_mesh(0.25);
  NodalField y = NodalField::interpolate(m, [](const Vec2& p) { return p.x(); });
  auto dec = levelset::extract_level_set(y, 0.5);
  REQUIRE(dec.components.size() == 1);
  const auto& c = dec.components[0];
  CHECK(!c.closed);
  CHECK(c.length == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.min_grad == doctest::Approx(1.0));
  // both endpoints on the boundary
  CHECK((c.points.front().y() == doctest::Approx(0.0) ||
         c.points.front().y() == doctest::Approx(1.0)));
  CHECK((c.points.back().y() == doctest::Approx(0.0) ||
         c.points.back().y() == doctest::Approx(1.0)));
  // {y > t} to the left of the direction of travel: curve runs downward
  CHECK(c.points.front().y() > c.points.back().y());
  for (const auto& p : c.points) CHECK(p.x() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("level above the range is empty, constant fields are empty") {
  auto m = square_mesh(0.25);
  NodalField y = NodalField::interpolate(m, [](const Vec2& p) { return p.x(); });
  CHECK(levelset::extract_level_set(y, 2.0).empty());
  NodalField c = NodalField::interpolate(m, [](const Vec2&) { return 0.5; });
  CHECK(levelset::extract_level_set(c, 0.5).empty());  // symbolic perturbation
}

TEST_CASE("radial closed component matches the analytic contour oracle") {
  auto m = radial_mesh(0.025);
  NodalField y = radial_nodal(m);

  ContourOracle oracle_half(testing::radial_field, 0.5);
  auto dec = levelset::extract_level_set(y, 0.5);
  REQUIRE(dec.components.size() == 1);
  const auto& c = dec.components[0];
  CHECK(c.closed);
  CHECK(c.points.front() == c.points.back());
  CHECK(c.min_grad > 0.5);
  CHECK(std::abs(c.length - oracle_half.length()) / oracle_half.length() <= 0.005);

  // the spec's quoted 3.524 value sits at level 0.7 of this field
  ContourOracle oracle_07(testing::radial_field, 0.7);
  auto dec07 = levelset::extract_level_set(y, 0.7);
  REQUIRE(dec07.components.size() == 1);
  CHECK(std::abs(dec07.components[0].length - oracle_07.length()) / oracle_07.length() <= 0.005);
  CHECK(std::abs(dec07.components[0].length - 3.524) / 3.524 <= 0.005);
}

TEST_CASE("length converges to the oracle at order >= 1") {
  ContourOracle oracle(testing::radial_field, 0.5);
  double L = oracle.length();
  std::vector<double> errs;
  auto m = radial_mesh(0.2);
  for (int lv = 0; lv < 3; ++lv) {
    auto dec = levelset::extract_level_set(radial_nodal(m), 0.5);
    REQUIRE(dec.components.size() == 1);
    errs.push_back(std::abs(dec.components[0].length - L));
    m = mesh::refine(*m);
  }
  double order = std::log2(errs[0] / errs[2]) / 2.0;
  CHECK(order >= 1.0);
}

TEST_CASE("curve integrals: constants and the gradient magnitude") {
  auto m = radial_mesh(0.025);
  NodalField y = radial_nodal(m);
  auto dec = levelset::extract_level_set(y, 0.5);
  REQUIRE(dec.components.size() == 1);
  const auto& c = dec.components[0];

  double one = levelset::curve_integral(c, [](const Vec2&) { return 1.0; });
  CHECK(one == doctest::Approx(c.length).epsilon(1e-12));
  double seven = levelset::curve_integral(c, [](const Vec2&) { return 7.0; });
  CHECK(seven == doctest::Approx(7.0 * c.length).epsilon(1e-12));

  double grad_line = levelset::curve_integral(
      c, [&](int tri, const Vec2&) { return y.gradient(tri).norm(); });
  ContourOracle oracle(testing::radial_field, 0.5);
  double exact = oracle.integral([](const Vec2& p) { return testing::radial_gradient(p).norm(); });
  CHECK(std::abs(grad_line - exact) / exact <= 0.01);

  CHECK_THROWS_AS(levelset::curve_integral(
                      c, [](const Vec2&) { return std::numeric_limits<double>::infinity(); }),
                  levelset::LevelSetError);
}

TEST_CASE("neighborhood classification") {
  auto m = square_mesh(0.0625);
  NodalField y = NodalField::interpolate(m, [](const Vec2& p) { return p.x(); });
  auto dec = levelset::extract_level_set(y, 0.5);
  REQUIRE(dec.components.size() == 1);

  auto cls = levelset::classify_neighborhood(y, dec, 0, 0.1);
  for (int t = 0; t < m->num_triangles(); ++t) {
    bool in_band = std::abs(m->tri_centroid[t].x() - 0.5) < 0.1;
    CHECK((cls.inside_band[t] || cls.outside_band[t]) == in_band);
    CHECK(!(cls.inside_band[t] && cls.outside_band[t]));
    if (cls.inside_band[t]) CHECK(m->tri_centroid[t].x() < 0.5);  // {y < t} side
  }

  auto tiny = levelset::classify_neighborhood(y, dec, 0, 1e-9);
  for (int t = 0; t < m->num_triangles(); ++t) {
    CHECK(!tiny.inside_band[t]);
    CHECK(!tiny.outside_band[t]);
  }
  CHECK_THROWS_AS(levelset::classify_neighborhood(y, dec, 0, -1.0), levelset::LevelSetError);
}

TEST_CASE("bands of nested components collide when epsilon is too large") {
  auto m = radial_mesh(0.05);
  // two concentric circles: |x|^2 = 0.3 +- 0.1 at level t = 0.01
  NodalField y = NodalField::interpolate(m, [](const Vec2& p) {
    double q = p.squaredNorm() - 0.3;
    return q * q;
  });
  auto dec = levelset::extract_level_set(y, 0.01);
  REQUIRE(dec.components.size() == 2);
  CHECK_NOTHROW(levelset::classify_neighborhood(y, dec, 0, 0.05));
  CHECK_THROWS_AS(levelset::classify_neighborhood(y, dec, 0, 0.25), levelset::LevelSetError);
}

TEST_CASE("component tracking follows constant shifts") {
  auto m = radial_mesh(0.025);
  NodalField y = radial_nodal(m);

  auto same = levelset::component_tracking(y, y, 0.5, 0.1);
  CHECK(same.count_in_band == 1);
  CHECK(same.hausdorff == doctest::Approx(0.0));

  NodalField shifted(m, y.values.array() + 1e-3);
  auto rep = levelset::component_tracking(y, shifted, 0.5, 0.1);
  CHECK(rep.count_in_band == 1);
  CHECK(rep.hausdorff > 0.0);
  CHECK(rep.hausdorff < 0.01);

  NodalField far(m, y.values.array() + 10.0);
  auto none = levelset::component_tracking(y, far, 0.5, 0.1);
  CHECK(none.count_in_band == 0);

  // Hausdorff distance decreases monotonically with the shift
  double prev = std::numeric_limits<double>::infinity();
  for (double d : {1e-1, 1e-2, 1e-3}) {
    NodalField yn(m, y.values.array() + d);
    auto r = levelset::component_tracking(y, yn, 0.5, 0.3);
    CHECK(r.count_in_band == 1);
    CHECK(r.hausdorff < prev);
    prev = r.hausdorff;
  }
}

TEST_CASE("integral continuity over perturbed level sets") {
  auto m = radial_mesh(0.025);
  NodalField y = radial_nodal(m);
  auto base = levelset::extract_level_set(y, 0.5);
  REQUIRE(base.components.size() == 1);
  auto f = [](int, const Vec2& p) { return 1.0 + p.x() * p.x() + 0.5 * p.y(); };
  double ref = levelset::curve_integral(base.components[0], f);

  double prev = std::numeric_limits<double>::infinity();
  for (double d : {1e-1, 1e-2, 1e-3}) {
    NodalField yn(m, y.values.array() + d);
    auto dec = levelset::extract_level_set(yn, 0.5);
    REQUIRE(dec.components.size() == 1);
    double val = levelset::curve_integral(dec.components[0], f);
    CHECK(std::abs(val - ref) < prev);
    prev = std::abs(val - ref);
  }
}

TEST_CASE("jump functional: linear field is exact") {
  auto m = square_mesh(0.25);
  NodalField y = NodalField::interpolate(m, [](const Vec2& p) { return p.x(); });
  const double sigma0 = 2.0;
  auto est = levelset::jump_functional(y, 0.5, sigma0, {0.5, 0.25, 0.1});
  for (double e : est.estimates) CHECK(e == doctest::Approx(2.0 * sigma0).epsilon(1e-12));
  CHECK(est.extrapolated == doctest::Approx(2.0 * sigma0).epsilon(1e-12));

  // invariant under refinement (geometry is exact)
  auto mf = mesh::refine(*m);
  NodalField yf = NodalField::interpolate(mf, [](const Vec2& p) { return p.x(); });
  auto est_f = levelset::jump_functional(yf, 0.5, sigma0, {0.5, 0.25, 0.1});
  for (std::size_t i = 0; i < est.estimates.size(); ++i)
    CHECK(est_f.estimates[i] == doctest::Approx(est.estimates[i]).epsilon(1e-12));

  NodalField constant = NodalField::interpolate(m, [](const Vec2&) { return 3.0; });
  auto zero = levelset::jump_functional(constant, 0.5, sigma0, {0.1, 0.05});
  for (double e : zero.estimates) CHECK(e == 0.0);

  CHECK_THROWS_AS(levelset::jump_functional(y, 0.5, sigma0, {0.1, 0.2}),
                  levelset::LevelSetError);
}

TEST_CASE("jump functional: radial extrapolation matches the coarea oracle") {
  auto m = radial_mesh(0.02);
  NodalField y = radial_nodal(m);
  const double sigma0 = 2.0;
  ContourOracle oracle(testing::radial_field, 0.5);
  double contour = oracle.integral([](const Vec2& p) {
    Vec2 g = testing::radial_gradient(p);
    return (std::abs(g.x()) + std::abs(g.y())) / g.norm();
  });
  double target = 2.0 * sigma0 * contour;
  auto est = levelset::jump_functional(y, 0.5, sigma0, {0.1, 0.05, 0.025, 0.0125});
  CHECK(std::abs(est.extrapolated - target) / target <= 0.02);
}

TEST_CASE("projection onto curves") {
  auto m = square_mesh(0.125);
  NodalField y = NodalField::interpolate(m, [](const Vec2& p) { return p.x(); });
  auto dec = levelset::extract_level_set(y, 0.5);
  REQUIRE(dec.components.size() == 1);
  const auto& line = dec.components[0];

  auto on = levelset::project_to_curve({0.5, 0.3}, line, y);
  CHECK(on.distance == doctest::Approx(0.0));
  CHECK(on.collinearity_residual == 0.0);

  auto off = levelset::project_to_curve({0.7, 0.3}, line, y);
  CHECK(off.foot.x() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(off.foot.y() == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(off.collinearity_residual == doctest::Approx(0.0).epsilon(1e-12));

  auto mr = radial_mesh(0.02);
  NodalField yr = radial_nodal(mr);
  auto decr = levelset::extract_level_set(yr, 0.5);
  REQUIRE(decr.components.size() == 1);
  // a point slightly off the curve projects along the gradient direction
  ContourOracle oracle(testing::radial_field, 0.5);
  Vec2 q = oracle.points()[137];
  Vec2 n = testing::radial_gradient(q).normalized();
  auto proj = levelset::project_to_curve(Vec2(q + 0.05 * n), decr.components[0], yr);
  CHECK(proj.collinearity_residual <= 0.05);
}
