#pragma once

// Split the region between two level sets at a common level value into
// S+ = {y1 > t > y2} and S- = {y1 < t < y2} by exact per-triangle clipping,
// and check Green's first identity on the signed union: the area terms use
// degree-2 quadrature on the clipped polygons, the boundary terms run over the
// extracted level curves with normals grad y_j / |grad y_j|.

#include "kinkopt/expr.hpp"
#include "kinkopt/levelset.hpp"
#include "kinkopt/mesh.hpp"

namespace kinkopt::green {

using geom::Polygon;
using mesh::NodalField;
using mesh::TriMesh;
using mesh::Vec2;

class GreenError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RegionPiece {
  int tri = -1;
  int sign = 0;  // +1 for S+, -1 for S-
  Polygon polygon;
};

struct RegionIndicator {
  std::vector<RegionPiece> pieces;

  double area_plus() const;
  double area_minus() const;
  /// integral of (1_{S+} - 1_{S-}) f dx, degree-2 per clipped polygon
  double signed_integral(const std::function<double(int, const Vec2&)>& f) const;
};

RegionIndicator region_split(const NodalField& y1, const NodalField& y2, double t,
                             const Polygon* window = nullptr);

/// Scalar field with values and gradients at points inside known triangles.
struct PointField {
  std::function<double(int, const Vec2&)> value;
  std::function<Vec2(int, const Vec2&)> grad;

  static PointField from_nodal(const NodalField& f);
  static PointField from_diff_expr(const expr::DiffExpr& f);
};

struct GreenResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

GreenResult green_residual(const NodalField& y1, const NodalField& y2, double t,
                           const PointField& v, const expr::DiffExpr& phi,
                           double theta_grad = 1e-8, const Polygon* window = nullptr);

}  // namespace kinkopt::green
