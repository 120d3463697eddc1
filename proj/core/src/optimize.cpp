#include "kinkopt/optimize.hpp"

#include <cmath>
#include <random>

namespace kinkopt::optimize {

namespace {

using mesh::Vec2;
using mesh::Vector;

Vector clamp_box(const Vector& v, double lo, double hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

double objective_of_state(const ControlProblem& p, const NodalField& y, const NodalField& u) {
  double tracking = mesh::integrate(*y.mesh, [&](int t, const Vec2& q) {
    return p.eval_L(q, y.value_in_tri(t, q));
  });
  return tracking + 0.5 * p.nu * mesh::l2_inner(u, u);
}

NodalField adjoint_of_state(const ControlProblem& p, MeshPtr m, const NodalField& y,
                            double linear_tol) {
  return pde::solve_adjoint(
      p, m, y, [&](int t, const Vec2& q) { return p.eval_L_y(q, y.value_in_tri(t, q)); },
      linear_tol);
}

double kkt_of(const ControlProblem& p, const NodalField& u, const NodalField& phi) {
  Vector proj = clamp_box(-phi.values / p.nu, p.alpha, p.beta);
  NodalField diff(u.mesh, u.values - proj);
  return mesh::l2_norm(diff);
}

}  // namespace

void OptimizerParams::validate() const {
  if (step0 < 0.0) throw pde::SolveError("step0 must be nonnegative");
  if (max_iter <= 0) throw pde::SolveError("max_iter must be positive");
  if (!(tol_kkt > 0.0)) throw pde::SolveError("tol_kkt must be positive");
  if (!(backtrack > 0.0 && backtrack < 1.0))
    throw pde::SolveError("backtracking factor must lie in (0,1)");
  if (!(armijo > 0.0 && armijo < 1.0)) throw pde::SolveError("armijo constant must lie in (0,1)");
}

double objective(const ControlProblem& p, MeshPtr m, const NodalField& u, double state_tol,
                 int state_max_iter) {
  auto [y, stats] = pde::solve_state(p, m, u, state_tol, state_max_iter);
  if (!stats.converged) throw pde::SolveError("objective: state solve did not converge");
  return objective_of_state(p, y, u);
}

NodalField gradient(const ControlProblem& p, MeshPtr m, const NodalField& u, double state_tol,
                    int state_max_iter, double linear_tol) {
  auto [y, stats] = pde::solve_state(p, m, u, state_tol, state_max_iter);
  if (!stats.converged) throw pde::SolveError("gradient: state solve did not converge");
  NodalField phi = adjoint_of_state(p, m, y, linear_tol);
  return NodalField(m, phi.values + p.nu * u.values);
}

double kkt_residual(const ControlProblem& p, MeshPtr m, const NodalField& u, double state_tol,
                    int state_max_iter, double linear_tol) {
  auto [y, stats] = pde::solve_state(p, m, u, state_tol, state_max_iter);
  if (!stats.converged) throw pde::SolveError("kkt_residual: state solve did not converge");
  NodalField phi = adjoint_of_state(p, m, y, linear_tol);
  return kkt_of(p, u, phi);
}

std::pair<NodalField, OptimizeStats> projected_gradient_solve(const ControlProblem& p, MeshPtr m,
                                                              const NodalField& u0,
                                                              const OptimizerParams& params) {
  params.validate();
  p.validate();
  const double step0 = params.step0 > 0.0 ? params.step0 : 1.0 / p.nu;

  NodalField u(m, clamp_box(u0.values, p.alpha, p.beta));
  OptimizeStats stats;

  NodalField y = NodalField::zero(m);
  {
    auto [y0, st] = pde::solve_state(p, m, u, params.state_tol, params.state_max_iter);
    if (!st.converged) throw pde::SolveError("projected gradient: initial state solve failed");
    y = std::move(y0);
  }
  double j_cur = objective_of_state(p, y, u);
  stats.objective_history.push_back(j_cur);

  for (int it = 0; it < params.max_iter; ++it) {
    stats.iterations = it;
    NodalField phi = adjoint_of_state(p, m, y, params.linear_tol);
    stats.kkt = kkt_of(p, u, phi);
    if (stats.kkt <= params.tol_kkt) {
      stats.converged = true;
      stats.objective = j_cur;
      return {std::move(u), std::move(stats)};
    }

    Vector g = phi.values + p.nu * u.values;
    double step = step0;
    bool accepted = false;
    while (step > 1e-14 * step0) {
      NodalField u_trial(m, clamp_box(u.values - step * g, p.alpha, p.beta));
      NodalField du(m, u_trial.values - u.values);
      double move2 = mesh::l2_inner(du, du);
      if (move2 == 0.0) break;  // stuck on the bounds
      auto [y_trial, st] =
          pde::solve_state(p, m, u_trial, params.state_tol, params.state_max_iter, &y);
      if (st.converged) {
        double j_trial = objective_of_state(p, y_trial, u_trial);
        if (j_trial <= j_cur - params.armijo / step * move2) {
          u = std::move(u_trial);
          y = std::move(y_trial);
          j_cur = j_trial;
          accepted = true;
          break;
        }
      }
      step *= params.backtrack;
    }
    stats.objective_history.push_back(j_cur);
    if (!accepted) {
      stats.converged = false;
      stats.objective = j_cur;
      stats.iterations = it + 1;
      return {std::move(u), std::move(stats)};
    }
  }
  NodalField phi = adjoint_of_state(p, m, y, params.linear_tol);
  stats.kkt = kkt_of(p, u, phi);
  stats.converged = stats.kkt <= params.tol_kkt;
  stats.objective = j_cur;
  stats.iterations = params.max_iter;
  return {std::move(u), std::move(stats)};
}

std::pair<NodalField, double> critical_cone_project(const ControlProblem& p,
                                                    const NodalField& u_bar,
                                                    const NodalField& phi_bar, const NodalField& v,
                                                    double tol_active) {
  Vector out = v.values;
  for (int i = 0; i < out.size(); ++i) {
    double mult = phi_bar.values[i] + p.nu * u_bar.values[i];
    if (std::abs(mult) > tol_active) {
      out[i] = 0.0;
      continue;
    }
    if (std::abs(u_bar.values[i] - p.alpha) <= tol_active && out[i] < 0.0) out[i] = 0.0;
    if (std::abs(u_bar.values[i] - p.beta) <= tol_active && out[i] > 0.0) out[i] = 0.0;
  }
  NodalField projected(v.mesh, std::move(out));
  NodalField removed(v.mesh, v.values - projected.values);
  return {std::move(projected), mesh::l2_norm(removed)};
}

std::vector<NodalField> sample_directions(MeshPtr m, int count, unsigned seed) {
  std::vector<NodalField> dirs;
  std::vector<int> interior;
  for (int i = 0; i < m->num_vertices(); ++i)
    if (!m->boundary_vertex[i]) interior.push_back(i);

  int bumps = std::max(0, count - 10);
  for (int k = 0; k < bumps && !interior.empty(); ++k) {
    int idx = interior[(k * interior.size()) / std::max(1, bumps)];
    NodalField v = NodalField::zero(m);
    v.values[idx] = 1.0;
    dirs.push_back(std::move(v));
  }
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  int smooth = std::min(count, 10);
  for (int k = 0; k < smooth; ++k) {
    double c[3][3];
    for (auto& row : c)
      for (double& x : row) x = normal(rng);
    dirs.push_back(NodalField::interpolate(m, [&](const Vec2& q) {
      double s = 0.0;
      for (int a = 1; a <= 3; ++a)
        for (int b = 1; b <= 3; ++b)
          s += c[a - 1][b - 1] * std::sin(a * M_PI * q.x()) * std::sin(b * M_PI * q.y());
      return s;
    }));
  }
  return dirs;
}

std::vector<SONCReport> check_soc(const ControlProblem& p, MeshPtr m, const NodalField& u_bar,
                                  const std::vector<NodalField>& directions,
                                  const SOCOptions& opts) {
  auto [y, stats] = pde::solve_state(p, m, u_bar, opts.state_tol, opts.state_max_iter);
  if (!stats.converged) throw pde::SolveError("check_soc: state solve did not converge");
  NodalField phi = adjoint_of_state(p, m, y, opts.linear_tol);
  double kkt = kkt_of(p, u_bar, phi);
  if (kkt > 10.0 * opts.tol_kkt)
    throw pde::SolveError("check_soc: base point is not stationary (kkt residual " +
                          std::to_string(kkt) + ")");

  std::vector<SONCReport> reports;
  reports.reserve(directions.size());
  curvature::GradField gphi = curvature::GradField::from_nodal(phi);
  for (int id = 0; id < static_cast<int>(directions.size()); ++id) {
    SONCReport rep;
    rep.direction_id = id;
    auto [v, violation] = critical_cone_project(p, u_bar, phi, directions[id], opts.tol_active);
    rep.cone_violation = violation;
    double norm = mesh::l2_norm(v);
    if (norm < 1e-12) {
      rep.skipped = true;
      rep.verdict = "skipped";
      reports.push_back(std::move(rep));
      continue;
    }
    v.values /= norm;
    NodalField z = pde::solve_linearized(p, m, y, v, opts.linear_tol);
    rep.q_s = curvature::compute_Qs_with(p, y, phi, v, v, z, z);
    rep.q_1 = curvature::compute_Q1_with(p, y, phi, z, z);
    auto [q2, detail] = curvature::compute_Q2_explicit(p, y, gphi, z, opts.theta_grad);
    rep.q_2 = q2;
    rep.q_total = rep.q_s + rep.q_1 + rep.q_2;
    if (opts.mode == SOCMode::Necessary)
      rep.verdict = rep.q_total < -opts.tol_q ? "violated" : "ok";
    else
      rep.verdict = rep.q_total > 0.0 ? "ok" : "violated";
    reports.push_back(std::move(rep));
  }
  return reports;
}

std::vector<SONCReport> check_soc(const ControlProblem& p, MeshPtr m, const NodalField& u_bar,
                                  int sampler_count, unsigned seed, const SOCOptions& opts) {
  return check_soc(p, m, u_bar, sample_directions(m, sampler_count, seed), opts);
}

}  // namespace kinkopt::optimize
