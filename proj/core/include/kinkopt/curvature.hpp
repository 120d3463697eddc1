#pragma once

// The three curvature contributions at (u, y, phi) in direction v:
//   Q_s: smooth part (running-cost Hessian, Tikhonov term, a'' term),
//   Q_1: first-order nonsmooth part from the one-sided derivative a'(y; z),
//   Q_2: second-order nonsmooth part, evaluated two independent ways:
//        the explicit boundary integral over {y = t_bar} and the PDE-path
//        band estimate (1/s^2) * jump * integral over the sign-crossing sets
//        Omega^2/Omega^3, both clipped exactly per triangle.

#include "kinkopt/levelset.hpp"
#include "kinkopt/pde.hpp"

namespace kinkopt::curvature {

using mesh::MeshPtr;
using mesh::NodalField;
using mesh::TriMesh;
using mesh::Vec2;
using pde::ControlProblem;

struct Q2Detail {
  std::vector<double> component_contributions;  // signed, sum equals q_2
  std::vector<int> filtered_components;         // dropped by the |grad y| threshold
  bool empty_levelset = false;
};

struct CurvatureReport {
  double q_s = 0.0;
  double q_1 = 0.0;
  double q_2 = 0.0;
  double total = 0.0;
  Q2Detail detail;
};

struct LimitExperiment {
  std::vector<double> s_list;
  std::vector<double> values;  // A_n(C, eps) / s^2
  double target = 0.0;
  std::vector<double> errors;  // |value - target|
};

struct Q2PathEstimate {
  std::vector<double> s_list;
  std::vector<double> values;
  double final_value = 0.0;
};

/// Gradient of phi at points of known triangles; P1 fields and analytic
/// expressions both fit.
struct GradField {
  std::function<Vec2(int, const Vec2&)> grad;
  static GradField from_nodal(const NodalField& f);
  static GradField from_diff_expr(const expr::DiffExpr& f);
};

double compute_Qs(const ControlProblem& p, const NodalField& y, const NodalField& phi,
                  const NodalField& v1, const NodalField& v2, double tol = 1e-12);
double compute_Q1(const ControlProblem& p, const NodalField& y, const NodalField& phi,
                  const NodalField& v1, const NodalField& v2, double tol = 1e-12);

/// Variants reusing already-solved linearized states.
double compute_Qs_with(const ControlProblem& p, const NodalField& y, const NodalField& phi,
                       const NodalField& v1, const NodalField& v2, const NodalField& z1,
                       const NodalField& z2);
double compute_Q1_with(const ControlProblem& p, const NodalField& y, const NodalField& phi,
                       const NodalField& z1, const NodalField& z2);

std::pair<double, Q2Detail> compute_Q2_explicit(const ControlProblem& p, const NodalField& y_bar,
                                                const GradField& phi, const NodalField& z_v,
                                                double theta_grad = 1e-8);

CurvatureReport compute_Q_total(const ControlProblem& p, MeshPtr m, const NodalField& u_bar,
                                const NodalField& v, double theta_grad = 1e-8,
                                double tol = 1e-12, double state_tol = 1e-10,
                                int state_max_iter = 200);

LimitExperiment an_experiment(const NodalField& y_bar, const NodalField& w, const GradField& phi,
                              double t_bar, int component_index, double epsilon,
                              const std::vector<double>& s_list, double theta_grad = 1e-8,
                              double delta = 0.0);
LimitExperiment an_tilde_experiment(const NodalField& y_bar, const NodalField& w,
                                    const GradField& phi, double t_bar, int component_index,
                                    double epsilon, const std::vector<double>& s_list,
                                    double theta_grad = 1e-8, double delta = 0.0);
LimitExperiment combined_limit(const NodalField& y_bar, const NodalField& w, const GradField& phi,
                               double t_bar, int component_index, double epsilon,
                               const std::vector<double>& s_list, double theta_grad = 1e-8,
                               double delta = 0.0);

Q2PathEstimate q2_liminf_estimate(const ControlProblem& p, MeshPtr m, const NodalField& u_bar,
                                  const NodalField& v, const std::vector<double>& s_list,
                                  double tol = 1e-12, double state_tol = 1e-10,
                                  int state_max_iter = 200, double delta = 0.0);

}  // namespace kinkopt::curvature
