#include "kinkopt/pde.hpp"

#include <Eigen/SparseLU>
#include <cmath>

namespace kinkopt::pde {

namespace {

double eval1(const expr::Expr& e, double t) {
  expr::EvalPoint p;
  p.y = t;
  return e.eval(p);
}

/// Restrict a full operator + rhs to interior dofs, solve, scatter back zeros
/// on the boundary.  Restriction commutes with transposition, which is what
/// makes the discrete adjoint identity exact.
Vector solve_dirichlet(const TriMesh& m, const SparseOperator& A_full, const Vector& rhs_full,
                       double tol) {
  const int n_in = m.interior_count;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(A_full.mat.nonZeros());
  for (int k = 0; k < A_full.mat.outerSize(); ++k)
    for (mesh::SpMat::InnerIterator it(A_full.mat, k); it; ++it) {
      int ri = m.interior_index[it.row()];
      int ci = m.interior_index[it.col()];
      if (ri >= 0 && ci >= 0) trips.emplace_back(ri, ci, it.value());
    }
  SparseOperator A;
  A.mat.resize(n_in, n_in);
  A.mat.setFromTriplets(trips.begin(), trips.end());

  Vector rhs(n_in);
  for (int i = 0; i < m.num_vertices(); ++i)
    if (m.interior_index[i] >= 0) rhs[m.interior_index[i]] = rhs_full[i];

  Vector x_in = linear_solve(A, rhs, tol);

  Vector x = Vector::Zero(m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i)
    if (m.interior_index[i] >= 0) x[i] = x_in[m.interior_index[i]];
  return x;
}

}  // namespace

PiecewiseC2Coefficient PiecewiseC2Coefficient::make(const expr::Expr& a0, const expr::Expr& a1,
                                                    double t_bar, double sample_lo,
                                                    double sample_hi) {
  PiecewiseC2Coefficient c;
  c.a0 = a0;
  c.a1 = a1;
  c.t_bar = t_bar;
  c.a0_d = expr::differentiate(a0, expr::Var::Y);
  c.a1_d = expr::differentiate(a1, expr::Var::Y);
  c.a0_dd = expr::differentiate(c.a0_d, expr::Var::Y);
  c.a1_dd = expr::differentiate(c.a1_d, expr::Var::Y);

  double v0 = eval1(c.a0, t_bar);
  double v1 = eval1(c.a1, t_bar);
  if (std::abs(v0 - v1) > 1e-12)
    throw CoefficientError("coefficient branches disagree at the kink: a0(t_bar)=" +
                           std::to_string(v0) + ", a1(t_bar)=" + std::to_string(v1));
  c.slope_jump = eval1(c.a0_d, t_bar) - eval1(c.a1_d, t_bar);
  c.sigma0 = std::abs(c.slope_jump);

  if (sample_lo > sample_hi) std::swap(sample_lo, sample_hi);
  const int n_samples = 201;
  for (int i = 0; i < n_samples; ++i) {
    double t = sample_lo + (sample_hi - sample_lo) * i / (n_samples - 1);
    if (c.value(t) < -1e-12)
      throw CoefficientError("coefficient a(t) negative at t=" + std::to_string(t));
  }
  return c;
}

PiecewiseC2Coefficient PiecewiseC2Coefficient::make(const std::string& a0, const std::string& a1,
                                                    double t_bar, double sample_lo,
                                                    double sample_hi) {
  return make(expr::parse_expr(a0), expr::parse_expr(a1), t_bar, sample_lo, sample_hi);
}

double PiecewiseC2Coefficient::value(double t) const {
  return t <= t_bar ? eval1(a0, t) : eval1(a1, t);
}

double PiecewiseC2Coefficient::dir_deriv(double t, double s) const {
  if (t < t_bar) return eval1(a0_d, t) * s;
  if (t > t_bar) return eval1(a1_d, t) * s;
  if (s > 0.0) return eval1(a1_d, t_bar) * s;
  if (s < 0.0) return eval1(a0_d, t_bar) * s;
  return 0.0;
}

double PiecewiseC2Coefficient::second(double t) const {
  if (t < t_bar) return eval1(a0_dd, t);
  if (t > t_bar) return eval1(a1_dd, t);
  return 0.0;
}

double PiecewiseC2Coefficient::classical_deriv(double t, double tie_tol) const {
  if (std::abs(t - t_bar) <= tie_tol) return 0.0;
  return t < t_bar ? eval1(a0_d, t) : eval1(a1_d, t);
}

void ControlProblem::validate() const {
  if (!(nu > 0.0)) throw CoefficientError("nu must be positive");
  if (!(alpha < beta)) throw CoefficientError("alpha < beta required");
}

double ControlProblem::eval_L(const Vec2& x, double y) const {
  return L.eval({x.x(), x.y(), y});
}
double ControlProblem::eval_L_y(const Vec2& x, double y) const {
  return dL_dy.eval({x.x(), x.y(), y});
}
double ControlProblem::eval_L_yy(const Vec2& x, double y) const {
  return d2L_dy2.eval({x.x(), x.y(), y});
}

Vector linear_solve(const SparseOperator& A, const Vector& b, double tol) {
  if (A.mat.rows() != A.mat.cols()) throw SolveError("linear_solve: matrix not square");
  if (A.mat.rows() != b.size()) throw SolveError("linear_solve: dimension mismatch");
  if (b.size() == 0) return Vector();

  Eigen::SparseLU<mesh::SpMat> lu;
  lu.compute(A.mat);
  if (lu.info() != Eigen::Success)
    throw SolveError("linear_solve: factorization failed (singular system?)");
  Vector x = lu.solve(b);

  double bnorm = b.norm();
  double target = tol * (bnorm > 0.0 ? bnorm : 1.0);
  double res = (A.mat * x - b).norm();
  for (int k = 0; k < 3 && res > target; ++k) {
    Vector corr = lu.solve(b - A.mat * x);
    x += corr;
    res = (A.mat * x - b).norm();
  }
  if (res > target)
    throw SolveError("linear_solve: residual " + std::to_string(res) + " above tolerance", res);
  return x;
}

std::vector<double> diffusion_coefficient(const ControlProblem& p, const TriMesh& m,
                                          const NodalField& y) {
  std::vector<double> coeff(m.num_triangles());
  for (int t = 0; t < m.num_triangles(); ++t) {
    const Vec2& c = m.tri_centroid[t];
    double val = p.b.eval({c.x(), c.y()}) + p.a.value(y.tri_average(t));
    if (!(val > 0.0))
      throw CoefficientError("diffusion coefficient b + a(y) not positive on triangle " +
                             std::to_string(t));
    coeff[t] = val;
  }
  return coeff;
}

std::vector<Vec2> drift_field(const ControlProblem& p, const NodalField& y) {
  const TriMesh& m = *y.mesh;
  std::vector<Vec2> w(m.num_triangles());
  for (int t = 0; t < m.num_triangles(); ++t)
    w[t] = p.a.classical_deriv(y.tri_average(t)) * y.gradient(t);
  return w;
}

namespace {

std::pair<NodalField, SolveStats> picard_iterate(const ControlProblem& p, MeshPtr m,
                                                 const Vector& rhs, double tol, int max_iter,
                                                 const NodalField* initial_guess) {
  if (tol <= 0.0) throw SolveError("solve_state: tol must be positive");
  const TriMesh& mesh_ref = *m;
  NodalField y = initial_guess ? *initial_guess : NodalField::zero(m);
  SolveStats stats;
  int grow_streak = 0;
  double prev_inc = std::numeric_limits<double>::infinity();

  for (int k = 0; k < max_iter; ++k) {
    auto coeff = diffusion_coefficient(p, mesh_ref, y);
    SparseOperator A = mesh::assemble_weighted_stiffness(mesh_ref, coeff, true);
    Vector y_next = solve_dirichlet(mesh_ref, A, rhs, 1e-13);

    Vector delta = y_next - y.values;
    double inc = delta.size() ? delta.cwiseAbs().maxCoeff() : 0.0;
    if (inc > prev_inc) {
      if (++grow_streak >= 3) {
        y_next = y.values + 0.5 * delta;  // relaxation safeguard
        inc = 0.5 * inc;
        grow_streak = 0;
      }
    } else {
      grow_streak = 0;
    }
    prev_inc = inc;
    stats.fixed_point_increments.push_back(inc);
    stats.iterations = k + 1;
    y.values = std::move(y_next);
    stats.final_residual = inc;
    if (inc <= tol) {
      stats.converged = true;
      return {std::move(y), std::move(stats)};
    }
  }
  stats.converged = false;
  return {std::move(y), std::move(stats)};
}

}  // namespace

std::pair<NodalField, SolveStats> solve_state(const ControlProblem& p, MeshPtr m,
                                              const NodalField& u, double tol, int max_iter,
                                              const NodalField* initial_guess) {
  Vector rhs = mesh::assemble_mass(*m).apply(u.values);
  return picard_iterate(p, m, rhs, tol, max_iter, initial_guess);
}

std::pair<NodalField, SolveStats> solve_state_load(
    const ControlProblem& p, MeshPtr m, const std::function<double(int, const Vec2&)>& rhs,
    double tol, int max_iter, const NodalField* initial_guess) {
  Vector load = mesh::load_vector(*m, rhs);
  return picard_iterate(p, m, load, tol, max_iter, initial_guess);
}

NodalField solve_linearized(const ControlProblem& p, MeshPtr m, const NodalField& y,
                            const NodalField& v, double tol) {
  const TriMesh& mesh_ref = *m;
  auto coeff = diffusion_coefficient(p, mesh_ref, y);
  SparseOperator A = mesh::assemble_weighted_stiffness(mesh_ref, coeff, true);
  SparseOperator D = mesh::assemble_drift(mesh_ref, drift_field(p, y));
  A.mat += D.mat;
  Vector rhs = mesh::assemble_mass(mesh_ref).apply(v.values);
  return NodalField(m, solve_dirichlet(mesh_ref, A, rhs, tol));
}

namespace {

NodalField adjoint_impl(const ControlProblem& p, MeshPtr m, const NodalField& y,
                        const Vector& rhs, double tol) {
  const TriMesh& mesh_ref = *m;
  auto coeff = diffusion_coefficient(p, mesh_ref, y);
  SparseOperator A = mesh::assemble_weighted_stiffness(mesh_ref, coeff, true);
  SparseOperator Dt = mesh::assemble_drift(mesh_ref, drift_field(p, y)).transposed();
  A.mat += Dt.mat;
  return NodalField(m, solve_dirichlet(mesh_ref, A, rhs, tol));
}

}  // namespace

NodalField solve_adjoint(const ControlProblem& p, MeshPtr m, const NodalField& y,
                         const NodalField& rhs, double tol) {
  Vector load = mesh::assemble_mass(*m).apply(rhs.values);
  return adjoint_impl(p, m, y, load, tol);
}

NodalField solve_adjoint(const ControlProblem& p, MeshPtr m, const NodalField& y,
                         const std::function<double(int, const Vec2&)>& rhs, double tol) {
  Vector load = mesh::load_vector(*m, rhs);
  return adjoint_impl(p, m, y, load, tol);
}

}  // namespace kinkopt::pde
