#pragma once

// Batch front-end: JSON scenario configs (or one of the built-in named
// scenarios) in, solver/verification artifacts (JSON fields, CSV tables) out.
// Exit codes: 0 success, 1 unknown command, 2 config/validation error,
// 3 solver failure.

#include <optional>
#include <string>
#include <vector>

#include "kinkopt/mesh.hpp"
#include "kinkopt/pde.hpp"

namespace kinkopt::scenario {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg, std::vector<std::string> missing_fields = {})
      : std::runtime_error(msg), missing(std::move(missing_fields)) {}
  std::vector<std::string> missing;
};

struct ScenarioConfig {
  std::string name;

  mesh::PolygonDomain domain = mesh::PolygonDomain::unit_square();
  double target_h = 0.25;
  int levels = 3;

  // problem data as expression strings
  std::string b, a0, a1, L, dL_dy, d2L_dy2;
  double t_bar = 0.0;
  double nu = 1.0;
  double alpha = -1.0;
  double beta = 1.0;

  // analytic fields for the geometry experiments
  std::string y_bar, y2, w, phi, v, u, u0;
  std::string green_phi, green_v;  // Green verification pair; falls back to phi/v

  // command parameters
  double t = 0.0;
  std::optional<double> green_t;
  double epsilon = 0.1;
  double theta_grad = 1e-8;
  double delta = 0.0;  // 0: 10 * max(s_list)
  std::vector<double> s_list;
  std::vector<double> r_list;
  double state_tol = 1e-10;
  int state_max_iter = 200;
  double linear_tol = 1e-12;
  double tol_kkt = 1e-9;
  int max_iter = 500;
  double tol_active = 1e-6;
  double tol_q = 1e-8;
  int soc_directions = 14;
  std::string soc_mode = "necessary";
  bool manufactured = false;
  int component_index = 0;

  static ScenarioConfig from_json_text(const std::string& text);
  /// Registry name first, then filesystem path.
  static ScenarioConfig load(const std::string& path_or_name);

  mesh::MeshPtr build_mesh_level(int level) const;
  /// Throws ConfigError listing every missing problem field by name.
  pde::ControlProblem build_problem() const;
  mesh::NodalField build_field(mesh::MeshPtr m, const std::string& expr_text,
                               const std::string& field_name) const;
};

const std::vector<std::string>& scenario_names();
ScenarioConfig builtin_scenario(const std::string& name);

/// Manufactured control -div[(b + a(y*)) grad y*] for the analytic state y*;
/// gradients/Laplacian of y* are symbolic.  The point form feeds
/// pde::solve_state_load, the nodal form the plain control interface.
std::function<double(int, const mesh::Vec2&)> manufactured_rhs(const pde::ControlProblem& p,
                                                               const expr::DiffExpr& y_star);
mesh::NodalField manufactured_control(const pde::ControlProblem& p, mesh::MeshPtr m,
                                      const expr::DiffExpr& y_star);

/// Commands: solve-state, solve-ocp, extract-levelset, verify-green,
/// jump-functional, an-limits, curvature, check-soc, convergence-study (the
/// study re-runs `subcommand` over refinement levels).
int run(const std::string& command, const std::string& subcommand, const std::string& config,
        const std::string& out_dir, int levels_override = -1, unsigned seed = 42);

}  // namespace kinkopt::scenario
