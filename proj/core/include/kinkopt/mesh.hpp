#pragma once

// Convex polygonal domains, deterministic P1 triangulations, and assembly of
// the sparse bilinear forms used by the state/linearized/adjoint solves.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinkopt/geometry.hpp"

namespace kinkopt::mesh {

using geom::Vec2;
using SpMat = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Convex polygon, vertices in counterclockwise order.
struct PolygonDomain {
  std::vector<Vec2> vertices;

  static PolygonDomain rectangle(const Vec2& lo, const Vec2& hi);
  static PolygonDomain unit_square() { return rectangle({0.0, 0.0}, {1.0, 1.0}); }

  void validate() const;  ///< throws MeshError on nonconvex/degenerate input
  double area() const;
  bool axis_aligned_rectangle() const;
};

/// Conforming triangle mesh with per-triangle P1 data precomputed.
struct TriMesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;  // CCW vertex triples
  std::vector<std::uint8_t> boundary_vertex;
  double h_max = 0.0;  // max triangle diameter

  // derived, filled by finalize()
  std::vector<double> tri_area;
  std::vector<Eigen::Matrix<double, 2, 3>> tri_basis_grad;  // columns: grad of phi_i
  std::vector<Vec2> tri_centroid;
  std::vector<int> interior_index;  // vertex -> compact interior id, -1 on boundary
  int interior_count = 0;

  void finalize();

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  double total_area() const;

  std::array<Vec2, 3> tri_points(int t) const;
  /// Edge midpoints of triangle t: the degree-2 quadrature nodes (weights |T|/3).
  std::array<Vec2, 3> quad_points(int t) const;

  std::string to_json() const;
};

using MeshPtr = std::shared_ptr<const TriMesh>;

MeshPtr build_mesh(const PolygonDomain& domain, double target_h);
MeshPtr refine(const TriMesh& m);

/// P1 scalar field: one value per mesh vertex, gradient constant per triangle.
struct NodalField {
  MeshPtr mesh;
  Vector values;

  NodalField() = default;
  NodalField(MeshPtr m, Vector v);
  static NodalField zero(MeshPtr m);
  static NodalField interpolate(MeshPtr m, const std::function<double(const Vec2&)>& f);

  double value_in_tri(int t, const Vec2& p) const;
  Vec2 gradient(int t) const;
  double tri_average(int t) const {
    const auto& tri = mesh->triangles[t];
    return (values[tri[0]] + values[tri[1]] + values[tri[2]]) / 3.0;
  }
  double max_abs() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }

  std::string to_json() const;
  static NodalField from_json(MeshPtr m, const std::string& json_text);
};

/// Square sparse matrix over vertex indices, the image of a bilinear form.
struct SparseOperator {
  SpMat mat;

  int rows() const { return static_cast<int>(mat.rows()); }
  Vector apply(const Vector& x) const { return mat * x; }
  double quadratic_form(const Vector& a, const Vector& b) const { return a.dot(mat * b); }
  SparseOperator transposed() const;
};

/// (i,j) = sum_T c_T grad(phi_i).grad(phi_j) |T|.  With require_positive the
/// coefficient must stay >= some positive floor (definiteness guarantee).
SparseOperator assemble_weighted_stiffness(const TriMesh& m, const std::vector<double>& coeff,
                                           bool require_positive = false);

/// (i,j) = sum_T (w_T.grad(phi_i)) avg_T(phi_j) |T|
SparseOperator assemble_drift(const TriMesh& m, const std::vector<Vec2>& w);
SparseOperator assemble_drift_transposed(const TriMesh& m, const std::vector<Vec2>& w);

/// Consistent P1 mass matrix.
SparseOperator assemble_mass(const TriMesh& m);

/// Vertex rule, exact for P1 fields.
double integrate(const NodalField& f);
/// Edge-midpoint rule (degree-2 exact); callback receives (triangle, point).
double integrate(const TriMesh& m, const std::function<double(int, const Vec2&)>& f);

/// Load vector b_i = integral f phi_i dx with the edge-midpoint rule.
Vector load_vector(const TriMesh& m, const std::function<double(int, const Vec2&)>& f);

double l2_norm(const NodalField& f);
double l2_inner(const NodalField& a, const NodalField& b);

}  // namespace kinkopt::mesh
