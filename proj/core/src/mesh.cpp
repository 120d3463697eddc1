#include "kinkopt/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "json.hpp"

namespace kinkopt::mesh {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

PolygonDomain PolygonDomain::rectangle(const Vec2& lo, const Vec2& hi) {
  PolygonDomain d;
  d.vertices = {lo, {hi.x(), lo.y()}, hi, {lo.x(), hi.y()}};
  d.validate();
  return d;
}

void PolygonDomain::validate() const {
  const std::size_t n = vertices.size();
  if (n < 3) throw MeshError("polygon needs at least 3 vertices");
  bool any_positive = false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[(i + 1) % n];
    const Vec2& c = vertices[(i + 2) % n];
    double cr = cross2(b - a, c - b);
    if (cr < -1e-14) throw MeshError("polygon is not convex/counterclockwise");
    if (cr > 0.0) any_positive = true;
  }
  if (!any_positive) throw MeshError("degenerate polygon (collinear vertices)");
  if (area() <= 0.0) throw MeshError("polygon has nonpositive area");
}

double PolygonDomain::area() const { return geom::polygon_area(vertices); }

bool PolygonDomain::axis_aligned_rectangle() const {
  if (vertices.size() != 4) return false;
  for (std::size_t i = 0; i < 4; ++i) {
    Vec2 e = vertices[(i + 1) % 4] - vertices[i];
    if (std::abs(e.x()) > 1e-14 && std::abs(e.y()) > 1e-14) return false;
  }
  return true;
}

void TriMesh::finalize() {
  const int nt = num_triangles();
  tri_area.assign(nt, 0.0);
  tri_basis_grad.assign(nt, Eigen::Matrix<double, 2, 3>::Zero());
  tri_centroid.assign(nt, Vec2::Zero());
  h_max = 0.0;
  for (int t = 0; t < nt; ++t) {
    auto [p0, p1, p2] = tri_points(t);
    double a2 = cross2(p1 - p0, p2 - p0);
    if (a2 <= 0.0) throw MeshError("triangle " + std::to_string(t) + " has nonpositive area");
    tri_area[t] = 0.5 * a2;
    tri_centroid[t] = (p0 + p1 + p2) / 3.0;
    // grad phi_i = rot90(opposite edge) / (2|T|)
    auto edge_grad = [&](const Vec2& a, const Vec2& b) -> Vec2 {
      Vec2 e = b - a;
      return Vec2(-e.y() / a2, e.x() / a2);
    };
    tri_basis_grad[t].col(0) = edge_grad(p1, p2);
    tri_basis_grad[t].col(1) = edge_grad(p2, p0);
    tri_basis_grad[t].col(2) = edge_grad(p0, p1);
    h_max = std::max({h_max, (p1 - p0).norm(), (p2 - p1).norm(), (p0 - p2).norm()});
  }
  interior_index.assign(num_vertices(), -1);
  interior_count = 0;
  for (int i = 0; i < num_vertices(); ++i)
    if (!boundary_vertex[i]) interior_index[i] = interior_count++;
}

double TriMesh::total_area() const {
  double s = 0.0;
  for (double a : tri_area) s += a;
  return s;
}

std::array<Vec2, 3> TriMesh::tri_points(int t) const {
  const auto& tr = triangles[t];
  return {vertices[tr[0]], vertices[tr[1]], vertices[tr[2]]};
}

std::array<Vec2, 3> TriMesh::quad_points(int t) const {
  auto [p0, p1, p2] = tri_points(t);
  return {0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p2 + p0)};
}

std::string TriMesh::to_json() const {
  std::ostringstream os;
  os << "{\"vertices\":[";
  for (int i = 0; i < num_vertices(); ++i) {
    if (i) os << ",";
    os << "[" << fmt_double(vertices[i].x()) << "," << fmt_double(vertices[i].y()) << "]";
  }
  os << "],\"triangles\":[";
  for (int t = 0; t < num_triangles(); ++t) {
    if (t) os << ",";
    os << "[" << triangles[t][0] << "," << triangles[t][1] << "," << triangles[t][2] << "]";
  }
  os << "],\"boundary\":[";
  bool first = true;
  for (int i = 0; i < num_vertices(); ++i) {
    if (boundary_vertex[i]) {
      if (!first) os << ",";
      os << i;
      first = false;
    }
  }
  os << "]}";
  return os.str();
}

namespace {

MeshPtr structured_rectangle(const PolygonDomain& domain, double target_h) {
  Vec2 lo = domain.vertices[0], hi = domain.vertices[0];
  for (const Vec2& v : domain.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  Vec2 ext = hi - lo;
  int nx = std::max(1, static_cast<int>(std::ceil(ext.x() / target_h - 1e-12)));
  int ny = std::max(1, static_cast<int>(std::ceil(ext.y() / target_h - 1e-12)));

  auto m = std::make_shared<TriMesh>();
  m->vertices.reserve((nx + 1) * (ny + 1));
  m->boundary_vertex.assign((nx + 1) * (ny + 1), 0);
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      m->vertices.emplace_back(lo.x() + ext.x() * i / nx, lo.y() + ext.y() * j / ny);
      if (i == 0 || i == nx || j == 0 || j == ny)
        m->boundary_vertex[j * (nx + 1) + i] = 1;
    }
  auto idx = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int a = idx(i, j), b = idx(i + 1, j), c = idx(i + 1, j + 1), d = idx(i, j + 1);
      if ((i + j) % 2 == 0) {
        m->triangles.push_back({a, b, c});
        m->triangles.push_back({a, c, d});
      } else {
        m->triangles.push_back({a, b, d});
        m->triangles.push_back({b, c, d});
      }
    }
  m->finalize();
  return m;
}

MeshPtr fan_triangulation(const PolygonDomain& domain) {
  auto m = std::make_shared<TriMesh>();
  m->vertices = domain.vertices;
  m->boundary_vertex.assign(m->vertices.size(), 1);
  for (int i = 1; i + 1 < static_cast<int>(domain.vertices.size()); ++i)
    m->triangles.push_back({0, i, i + 1});
  m->finalize();
  return m;
}

}  // namespace

MeshPtr build_mesh(const PolygonDomain& domain, double target_h) {
  if (target_h <= 0.0) throw MeshError("target_h must be positive");
  domain.validate();
  if (domain.axis_aligned_rectangle()) return structured_rectangle(domain, target_h);
  MeshPtr m = fan_triangulation(domain);
  while (m->h_max > target_h) m = refine(*m);
  return m;
}

MeshPtr refine(const TriMesh& old) {
  auto m = std::make_shared<TriMesh>();
  m->vertices = old.vertices;
  m->boundary_vertex = old.boundary_vertex;

  // edge (sorted pair) -> (midpoint id, #adjacent triangles)
  std::map<std::pair<int, int>, std::pair<int, int>> edges;
  auto midpoint = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = edges.find(key);
    if (it == edges.end()) {
      int id = static_cast<int>(m->vertices.size());
      m->vertices.push_back(0.5 * (old.vertices[a] + old.vertices[b]));
      m->boundary_vertex.push_back(0);
      it = edges.emplace(key, std::make_pair(id, 0)).first;
    }
    it->second.second += 1;
    return it->second.first;
  };

  for (const auto& tr : old.triangles) {
    int a = tr[0], b = tr[1], c = tr[2];
    int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    m->triangles.push_back({a, ab, ca});
    m->triangles.push_back({ab, b, bc});
    m->triangles.push_back({ca, bc, c});
    m->triangles.push_back({ab, bc, ca});
  }
  // midpoints of edges seen by a single triangle sit on the boundary
  for (const auto& [key, val] : edges)
    if (val.second == 1) m->boundary_vertex[val.first] = 1;
  m->finalize();
  return m;
}

NodalField::NodalField(MeshPtr m, Vector v) : mesh(std::move(m)), values(std::move(v)) {
  if (values.size() != mesh->num_vertices())
    throw MeshError("nodal field size does not match mesh");
}

NodalField NodalField::zero(MeshPtr m) {
  Vector v = Vector::Zero(m->num_vertices());
  return NodalField(std::move(m), std::move(v));
}

NodalField NodalField::interpolate(MeshPtr m, const std::function<double(const Vec2&)>& f) {
  Vector v(m->num_vertices());
  for (int i = 0; i < m->num_vertices(); ++i) v[i] = f(m->vertices[i]);
  return NodalField(std::move(m), std::move(v));
}

double NodalField::value_in_tri(int t, const Vec2& p) const {
  const auto& tr = mesh->triangles[t];
  auto [p0, p1, p2] = mesh->tri_points(t);
  double a2 = 2.0 * mesh->tri_area[t];
  double l0 = cross2(p1 - p, p2 - p) / a2;
  double l1 = cross2(p2 - p, p0 - p) / a2;
  double l2 = 1.0 - l0 - l1;
  return l0 * values[tr[0]] + l1 * values[tr[1]] + l2 * values[tr[2]];
}

Vec2 NodalField::gradient(int t) const {
  const auto& tr = mesh->triangles[t];
  const auto& G = mesh->tri_basis_grad[t];
  return G.col(0) * values[tr[0]] + G.col(1) * values[tr[1]] + G.col(2) * values[tr[2]];
}

std::string NodalField::to_json() const {
  std::ostringstream os;
  os << "[";
  for (int i = 0; i < values.size(); ++i) {
    if (i) os << ",";
    os << fmt_double(values[i]);
  }
  os << "]";
  return os.str();
}

NodalField NodalField::from_json(MeshPtr m, const std::string& json_text) {
  auto j = nlohmann::json::parse(json_text);
  if (!j.is_array()) throw MeshError("field JSON must be an array");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return NodalField(std::move(m), std::move(v));
}

SparseOperator SparseOperator::transposed() const {
  SparseOperator out;
  out.mat = SpMat(mat.transpose());
  return out;
}

SparseOperator assemble_weighted_stiffness(const TriMesh& m, const std::vector<double>& coeff,
                                           bool require_positive) {
  if (static_cast<int>(coeff.size()) != m.num_triangles())
    throw MeshError("coefficient vector size does not match triangle count");
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(m.num_triangles() * 9);
  for (int t = 0; t < m.num_triangles(); ++t) {
    double c = coeff[t];
    if (!std::isfinite(c)) throw MeshError("non-finite coefficient on triangle " + std::to_string(t));
    if (require_positive && c <= 0.0)
      throw MeshError("nonpositive coefficient on triangle " + std::to_string(t) +
                      " (definiteness requested)");
    const auto& tr = m.triangles[t];
    const auto& G = m.tri_basis_grad[t];
    double w = c * m.tri_area[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trips.emplace_back(tr[i], tr[j], w * G.col(i).dot(G.col(j)));
  }
  SparseOperator op;
  op.mat.resize(m.num_vertices(), m.num_vertices());
  op.mat.setFromTriplets(trips.begin(), trips.end());
  return op;
}

SparseOperator assemble_drift(const TriMesh& m, const std::vector<Vec2>& w) {
  if (static_cast<int>(w.size()) != m.num_triangles())
    throw MeshError("drift vector size does not match triangle count");
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(m.num_triangles() * 9);
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    const auto& G = m.tri_basis_grad[t];
    double third = m.tri_area[t] / 3.0;
    for (int i = 0; i < 3; ++i) {
      double wi = w[t].dot(G.col(i)) * third;
      for (int j = 0; j < 3; ++j) trips.emplace_back(tr[i], tr[j], wi);
    }
  }
  SparseOperator op;
  op.mat.resize(m.num_vertices(), m.num_vertices());
  op.mat.setFromTriplets(trips.begin(), trips.end());
  return op;
}

SparseOperator assemble_drift_transposed(const TriMesh& m, const std::vector<Vec2>& w) {
  return assemble_drift(m, w).transposed();
}

SparseOperator assemble_mass(const TriMesh& m) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(m.num_triangles() * 9);
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    double a = m.tri_area[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trips.emplace_back(tr[i], tr[j], (i == j ? a / 6.0 : a / 12.0));
  }
  SparseOperator op;
  op.mat.resize(m.num_vertices(), m.num_vertices());
  op.mat.setFromTriplets(trips.begin(), trips.end());
  return op;
}

double integrate(const NodalField& f) {
  const TriMesh& m = *f.mesh;
  double s = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) s += m.tri_area[t] * f.tri_average(t);
  return s;
}

double integrate(const TriMesh& m, const std::function<double(int, const Vec2&)>& f) {
  double s = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    auto q = m.quad_points(t);
    double local = f(t, q[0]) + f(t, q[1]) + f(t, q[2]);
    if (!std::isfinite(local)) throw MeshError("non-finite integrand on triangle " + std::to_string(t));
    s += m.tri_area[t] / 3.0 * local;
  }
  return s;
}

Vector load_vector(const TriMesh& m, const std::function<double(int, const Vec2&)>& f) {
  Vector b = Vector::Zero(m.num_vertices());
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    auto q = m.quad_points(t);
    double w = m.tri_area[t] / 3.0;
    double f01 = f(t, q[0]), f12 = f(t, q[1]), f20 = f(t, q[2]);
    // phi_i at edge midpoints: 1/2 on the two adjacent midpoints, 0 opposite
    b[tr[0]] += w * 0.5 * (f01 + f20);
    b[tr[1]] += w * 0.5 * (f01 + f12);
    b[tr[2]] += w * 0.5 * (f12 + f20);
  }
  return b;
}

double l2_inner(const NodalField& a, const NodalField& b) {
  const TriMesh& m = *a.mesh;
  double s = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    double aa[3] = {a.values[tr[0]], a.values[tr[1]], a.values[tr[2]]};
    double bb[3] = {b.values[tr[0]], b.values[tr[1]], b.values[tr[2]]};
    double cross = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) cross += aa[i] * bb[j] * (i == j ? 2.0 : 1.0);
    s += m.tri_area[t] / 12.0 * cross;
  }
  return s;
}

double l2_norm(const NodalField& f) { return std::sqrt(std::max(0.0, l2_inner(f, f))); }

}  // namespace kinkopt::mesh
