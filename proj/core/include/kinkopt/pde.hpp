#pragma once

// The quasilinear state equation -div[(b+a(y))grad y] = u with homogeneous
// Dirichlet data, its linearization, and the adjoint equation.  The kinked
// coefficient a switches branches a0/a1 at t_bar; the drift matrix assembled
// from the classical derivative of a (zero where a triangle average hits
// t_bar) is the exact Jacobian of the Picard-frozen discrete state map, so the
// adjoint built from its transpose satisfies discrete duality to solver
// accuracy.

#include <optional>

#include "kinkopt/expr.hpp"
#include "kinkopt/mesh.hpp"

namespace kinkopt::pde {

using mesh::MeshPtr;
using mesh::NodalField;
using mesh::SparseOperator;
using mesh::TriMesh;
using mesh::Vec2;
using mesh::Vector;

class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& msg, double residual = 0.0)
      : std::runtime_error(msg), final_residual(residual) {}
  double final_residual;
};

class CoefficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Piecewise-C2 coefficient a(t) = a0(t) for t <= t_bar, a1(t) for t > t_bar,
/// continuous at the kink; sigma0 is the absolute slope jump there.
struct PiecewiseC2Coefficient {
  expr::Expr a0, a1;          // branch values, functions of the variable y
  expr::Expr a0_d, a1_d;      // first derivatives
  expr::Expr a0_dd, a1_dd;    // second derivatives
  double t_bar = 0.0;
  double sigma0 = 0.0;        // |a0'(t_bar) - a1'(t_bar)|
  double slope_jump = 0.0;    // a0'(t_bar) - a1'(t_bar), signed

  static PiecewiseC2Coefficient make(const expr::Expr& a0, const expr::Expr& a1, double t_bar,
                                     double sample_lo, double sample_hi);
  static PiecewiseC2Coefficient make(const std::string& a0, const std::string& a1, double t_bar,
                                     double sample_lo = -2.0, double sample_hi = 2.0);

  double value(double t) const;
  /// One-sided directional derivative a'(t; s); at the kink the branch follows
  /// the sign of s and a'(t_bar; 0) = 0.
  double dir_deriv(double t, double s) const;
  /// Classical second derivative; 0 at the kink.
  double second(double t) const;
  /// Classical first derivative; 0 when |t - t_bar| <= tie_tol.
  double classical_deriv(double t, double tie_tol = 1e-14) const;
};

/// Full data for the control problem: diffusion offset b(x), kinked a, running
/// cost L(x,y) with its y-derivatives, Tikhonov weight nu, box bounds.
struct ControlProblem {
  expr::DiffExpr b;
  PiecewiseC2Coefficient a;
  expr::Expr L, dL_dy, d2L_dy2;
  double nu = 1.0;
  double alpha = -1.0;
  double beta = 1.0;

  void validate() const;  ///< nu > 0, alpha < beta
  double eval_L(const Vec2& x, double y) const;
  double eval_L_y(const Vec2& x, double y) const;
  double eval_L_yy(const Vec2& x, double y) const;
};

struct SolveStats {
  int iterations = 0;
  double final_residual = 0.0;
  std::vector<double> fixed_point_increments;
  bool converged = true;
};

/// Raw sparse solve (SparseLU + iterative refinement); throws SolveError when
/// the relative residual cannot be pushed below tol.
Vector linear_solve(const SparseOperator& A, const Vector& b, double tol = 1e-12);

/// Per-triangle diffusion coefficient b + a(y) evaluated at centroids /
/// triangle averages; throws CoefficientError when it is not positive.
std::vector<double> diffusion_coefficient(const ControlProblem& p, const TriMesh& m,
                                          const NodalField& y);
/// Per-triangle drift w_T = a'(avg y_T) grad y_T (classical derivative).
std::vector<Vec2> drift_field(const ControlProblem& p, const NodalField& y);

std::pair<NodalField, SolveStats> solve_state(const ControlProblem& p, MeshPtr m,
                                              const NodalField& u, double tol = 1e-10,
                                              int max_iter = 100,
                                              const NodalField* initial_guess = nullptr);

/// Same fixed-point solve with the load assembled by quadrature of a point
/// callback; manufactured controls with coefficient kinks stay exact this way.
std::pair<NodalField, SolveStats> solve_state_load(
    const ControlProblem& p, MeshPtr m, const std::function<double(int, const Vec2&)>& rhs,
    double tol = 1e-10, int max_iter = 100, const NodalField* initial_guess = nullptr);

NodalField solve_linearized(const ControlProblem& p, MeshPtr m, const NodalField& y,
                            const NodalField& v, double tol = 1e-12);

NodalField solve_adjoint(const ControlProblem& p, MeshPtr m, const NodalField& y,
                         const NodalField& rhs, double tol = 1e-12);
NodalField solve_adjoint(const ControlProblem& p, MeshPtr m, const NodalField& y,
                         const std::function<double(int, const Vec2&)>& rhs,
                         double tol = 1e-12);

}  // namespace kinkopt::pde
