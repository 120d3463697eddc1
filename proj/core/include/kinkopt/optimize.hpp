#pragma once

// Projected gradient with Armijo backtracking over the box-constrained
// admissible set, first-order residuals, critical-cone projection, and the
// sampled second-order condition checks.

#include "kinkopt/curvature.hpp"
#include "kinkopt/pde.hpp"

namespace kinkopt::optimize {

using curvature::CurvatureReport;
using mesh::MeshPtr;
using mesh::NodalField;
using pde::ControlProblem;

struct OptimizerParams {
  double step0 = 0.0;  ///< 0: use 1/nu
  int max_iter = 500;
  double tol_kkt = 1e-9;
  double backtrack = 0.5;   ///< step shrink factor, in (0,1)
  double armijo = 1e-4;     ///< sufficient-decrease constant, in (0,1)
  double state_tol = 1e-11;
  int state_max_iter = 200;
  double linear_tol = 1e-12;

  void validate() const;
};

struct OptimizeStats {
  int iterations = 0;
  double kkt = 0.0;
  double objective = 0.0;
  std::vector<double> objective_history;
  bool converged = false;
};

struct SONCReport {
  int direction_id = -1;
  double q_s = 0.0, q_1 = 0.0, q_2 = 0.0, q_total = 0.0;
  double cone_violation = 0.0;
  bool skipped = false;  ///< direction projected to ~0 in the cone
  std::string verdict;   ///< "ok", "violated" (necessary mode) or "skipped"
};

enum class SOCMode { Necessary, Sufficient };

struct SOCOptions {
  SOCMode mode = SOCMode::Necessary;
  double tol_q = 1e-8;       ///< necessary mode flags Q < -tol_q
  double tol_active = 1e-6;  ///< active-set / cone detection
  double theta_grad = 1e-8;
  double tol_kkt = 1e-9;  ///< stationarity gate: kkt(u_bar) <= 10 * tol_kkt
  double state_tol = 1e-11;
  int state_max_iter = 200;
  double linear_tol = 1e-12;
};

double objective(const ControlProblem& p, MeshPtr m, const NodalField& u,
                 double state_tol = 1e-11, int state_max_iter = 200);

NodalField gradient(const ControlProblem& p, MeshPtr m, const NodalField& u,
                    double state_tol = 1e-11, int state_max_iter = 200,
                    double linear_tol = 1e-12);

std::pair<NodalField, OptimizeStats> projected_gradient_solve(const ControlProblem& p, MeshPtr m,
                                                              const NodalField& u0,
                                                              const OptimizerParams& params = {});

double kkt_residual(const ControlProblem& p, MeshPtr m, const NodalField& u,
                    double state_tol = 1e-11, int state_max_iter = 200,
                    double linear_tol = 1e-12);

/// Nodewise cone projection: v >= 0 where u_bar is at alpha, v <= 0 where at
/// beta, v = 0 where |phi_bar + nu u_bar| > tol_active.  Returns the projected
/// direction and the L2 norm of what was removed.
std::pair<NodalField, double> critical_cone_project(const ControlProblem& p,
                                                    const NodalField& u_bar,
                                                    const NodalField& phi_bar, const NodalField& v,
                                                    double tol_active = 1e-6);

std::vector<SONCReport> check_soc(const ControlProblem& p, MeshPtr m, const NodalField& u_bar,
                                  const std::vector<NodalField>& directions,
                                  const SOCOptions& opts = {});
std::vector<SONCReport> check_soc(const ControlProblem& p, MeshPtr m, const NodalField& u_bar,
                                  int sampler_count, unsigned seed, const SOCOptions& opts = {});

/// Coordinate bumps at interior nodes plus 10 seeded random smooth bumps.
std::vector<NodalField> sample_directions(MeshPtr m, int count, unsigned seed);

}  // namespace kinkopt::optimize
