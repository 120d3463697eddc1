#include "kinkopt/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "kinkopt/curvature.hpp"
#include "kinkopt/green.hpp"
#include "kinkopt/levelset.hpp"
#include "kinkopt/optimize.hpp"

namespace kinkopt::scenario {

namespace fs = std::filesystem;
using json = nlohmann::json;
using mesh::MeshPtr;
using mesh::NodalField;
using mesh::Vec2;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + tmp.string());
    os << content;
  }
  fs::rename(tmp, path);
}

expr::DiffExpr diff_field(const std::string& text, const std::string& field_name) {
  try {
    return expr::DiffExpr::build(text);
  } catch (const expr::ParseError& e) {
    throw ConfigError("field '" + field_name + "' does not parse: " + e.what(), {field_name});
  }
}

}  // namespace

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ScenarioConfig c;
  c.name = j.value("name", "");

  if (j.contains("domain")) {
    const auto& d = j["domain"];
    std::string type = d.value("type", "rectangle");
    if (type == "rectangle") {
      auto lo = d.value("lo", std::vector<double>{0.0, 0.0});
      auto hi = d.value("hi", std::vector<double>{1.0, 1.0});
      c.domain = mesh::PolygonDomain::rectangle({lo.at(0), lo.at(1)}, {hi.at(0), hi.at(1)});
    } else if (type == "polygon") {
      mesh::PolygonDomain poly;
      for (const auto& v : d.at("vertices")) poly.vertices.emplace_back(v.at(0), v.at(1));
      poly.validate();
      c.domain = poly;
    } else {
      throw ConfigError("unknown domain type '" + type + "'");
    }
  }
  if (j.contains("mesh")) {
    c.target_h = j["mesh"].value("target_h", c.target_h);
    c.levels = j["mesh"].value("levels", c.levels);
  }
  if (j.contains("problem")) {
    const auto& p = j["problem"];
    c.b = p.value("b", "");
    c.a0 = p.value("a0", "");
    c.a1 = p.value("a1", "");
    c.L = p.value("L", "");
    c.dL_dy = p.value("dL_dy", "");
    c.d2L_dy2 = p.value("d2L_dy2", "");
    c.t_bar = p.value("t_bar", 0.0);
    c.nu = p.value("nu", 1.0);
    c.alpha = p.value("alpha", -1.0);
    c.beta = p.value("beta", 1.0);
  }
  if (j.contains("fields")) {
    const auto& f = j["fields"];
    c.y_bar = f.value("y_bar", "");
    c.y2 = f.value("y2", "");
    c.w = f.value("w", "");
    c.phi = f.value("phi", "");
    c.v = f.value("v", "");
    c.u = f.value("u", "");
    c.u0 = f.value("u0", "");
    c.green_phi = f.value("green_phi", "");
    c.green_v = f.value("green_v", "");
  }
  if (j.contains("params")) {
    const auto& p = j["params"];
    c.t = p.value("t", c.t);
    if (p.contains("green_t")) c.green_t = p["green_t"].get<double>();
    c.epsilon = p.value("epsilon", c.epsilon);
    c.theta_grad = p.value("theta_grad", c.theta_grad);
    c.delta = p.value("delta", c.delta);
    if (p.contains("s_list")) c.s_list = p["s_list"].get<std::vector<double>>();
    if (p.contains("r_list")) c.r_list = p["r_list"].get<std::vector<double>>();
    c.state_tol = p.value("state_tol", c.state_tol);
    c.state_max_iter = p.value("state_max_iter", c.state_max_iter);
    c.linear_tol = p.value("linear_tol", c.linear_tol);
    c.tol_kkt = p.value("tol_kkt", c.tol_kkt);
    c.max_iter = p.value("max_iter", c.max_iter);
    c.tol_active = p.value("tol_active", c.tol_active);
    c.tol_q = p.value("tol_q", c.tol_q);
    c.soc_directions = p.value("soc_directions", c.soc_directions);
    c.soc_mode = p.value("soc_mode", c.soc_mode);
    c.manufactured = p.value("manufactured", c.manufactured);
    c.component_index = p.value("component_index", c.component_index);
  }
  return c;
}

ScenarioConfig ScenarioConfig::load(const std::string& path_or_name) {
  for (const auto& n : scenario_names())
    if (n == path_or_name) return builtin_scenario(n);
  std::ifstream is(path_or_name, std::ios::binary);
  if (!is)
    throw ConfigError("config '" + path_or_name +
                      "' is neither a built-in scenario nor a readable file");
  std::ostringstream buf;
  buf << is.rdbuf();
  return from_json_text(buf.str());
}

MeshPtr ScenarioConfig::build_mesh_level(int level) const {
  MeshPtr m = mesh::build_mesh(domain, target_h);
  for (int i = 0; i < level; ++i) m = mesh::refine(*m);
  return m;
}

pde::ControlProblem ScenarioConfig::build_problem() const {
  std::vector<std::string> missing;
  for (const auto& [key, val] : std::initializer_list<std::pair<const char*, const std::string*>>{
           {"problem.b", &b},
           {"problem.a0", &a0},
           {"problem.a1", &a1},
           {"problem.L", &L},
           {"problem.dL_dy", &dL_dy},
           {"problem.d2L_dy2", &d2L_dy2}})
    if (val->empty()) missing.push_back(key);
  if (!missing.empty()) {
    std::string msg = "missing problem fields:";
    for (const auto& f : missing) msg += " " + f;
    throw ConfigError(msg, missing);
  }
  pde::ControlProblem p;
  p.b = diff_field(b, "problem.b");
  try {
    p.a = pde::PiecewiseC2Coefficient::make(a0, a1, t_bar, t_bar - 2.0, t_bar + 2.0);
  } catch (const expr::ParseError& e) {
    throw ConfigError(std::string("coefficient branch does not parse: ") + e.what(),
                      {"problem.a0", "problem.a1"});
  }
  try {
    p.L = expr::parse_expr(L);
    p.dL_dy = expr::parse_expr(dL_dy);
    p.d2L_dy2 = expr::parse_expr(d2L_dy2);
  } catch (const expr::ParseError& e) {
    throw ConfigError(std::string("cost expression does not parse: ") + e.what(),
                      {"problem.L"});
  }
  p.nu = nu;
  p.alpha = alpha;
  p.beta = beta;
  if (!(p.nu > 0.0)) throw ConfigError("problem.nu must be positive", {"problem.nu"});
  if (!(p.alpha < p.beta))
    throw ConfigError("problem.alpha must be below problem.beta", {"problem.alpha"});
  return p;
}

NodalField ScenarioConfig::build_field(MeshPtr m, const std::string& expr_text,
                                       const std::string& field_name) const {
  if (expr_text.empty())
    throw ConfigError("missing field: " + field_name, {field_name});
  expr::Expr e;
  try {
    e = expr::parse_expr(expr_text);
  } catch (const expr::ParseError& err) {
    throw ConfigError("field '" + field_name + "' does not parse: " + err.what(), {field_name});
  }
  return NodalField::interpolate(m, [&](const Vec2& p) { return e.eval({p.x(), p.y()}); });
}

// ---------------------------------------------------------------------------
// Built-in scenarios
// ---------------------------------------------------------------------------

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {
      "smooth-manufactured", "kinked-manufactured", "radial-geometry",
      "strip-geometry",      "tracking-ocp",        "cusp-green",
  };
  return names;
}

ScenarioConfig builtin_scenario(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.b = "1";
  c.L = "0.5*y^2";
  c.dL_dy = "y";
  c.d2L_dy2 = "1";
  c.nu = 1e-2;
  c.alpha = -100.0;
  c.beta = 100.0;

  if (name == "smooth-manufactured") {
    c.domain = mesh::PolygonDomain::unit_square();
    c.target_h = 0.125;
    c.levels = 4;
    c.a0 = "y^2";
    c.a1 = "y^2";
    c.t_bar = 10.0;
    c.y_bar = "sin(pi*x1)*sin(pi*x2)";
    c.v = "sin(pi*x1)*sin(pi*x2)";
    c.manufactured = true;
    return c;
  }
  if (name == "kinked-manufactured") {
    c.domain = mesh::PolygonDomain::unit_square();
    c.target_h = 0.125;
    c.levels = 3;
    c.a0 = "0.5-y";
    c.a1 = "y-0.5";
    c.t_bar = 0.5;
    c.t = 0.5;
    c.y_bar = "sin(pi*x1)*sin(pi*x2)";
    c.v = "sin(pi*x1)*sin(pi*x2)";
    c.manufactured = true;
    return c;
  }
  if (name == "radial-geometry") {
    c.domain = mesh::PolygonDomain::rectangle({-1.0, -1.0}, {1.0, 1.0});
    c.target_h = 0.05;
    c.levels = 3;
    c.a0 = "0.5-y";
    c.a1 = "y-0.5";
    c.t_bar = 0.5;
    c.t = 0.5;
    c.green_t = 0.45;
    c.epsilon = 0.2;
    c.y_bar = "(1-x1^2)*(1-x2^2)";
    c.y2 = "0.9*(1-x1^2)*(1-x2^2)";
    c.w = "(1-x1^2)*(1-x2^2)";
    c.phi = "x1^2+x2^2";
    c.green_phi = "exp(x1)+sin(2*x2)";
    c.green_v = "exp(x1)*x2^2";
    c.v = "x1^2";
    c.s_list = {1e-1, 3e-2, 1e-2};
    c.r_list = {0.1, 0.05, 0.025, 0.0125};
    return c;
  }
  if (name == "strip-geometry") {
    c.domain = mesh::PolygonDomain::unit_square();
    c.target_h = 0.125;
    c.levels = 3;
    c.a0 = "0.5-y";
    c.a1 = "y-0.5";
    c.t_bar = 0.5;
    c.t = 0.5;
    c.y_bar = "x1";
    c.y2 = "x1-0.2";
    c.w = "x1*(1-x1)*x2*(1-x2)";
    c.phi = "x1^2+x2^2";
    c.v = "x1^2";
    c.r_list = {0.5, 0.25, 0.125};
    return c;
  }
  if (name == "tracking-ocp") {
    c.domain = mesh::PolygonDomain::unit_square();
    c.target_h = 0.125;
    c.levels = 3;
    c.a0 = "0.15-y";
    c.a1 = "y-0.15";
    c.t_bar = 0.15;
    c.t = 0.15;
    c.L = "0.5*(y-0.3*sin(pi*x1)*sin(pi*x2))^2";
    c.dL_dy = "y-0.3*sin(pi*x1)*sin(pi*x2)";
    c.d2L_dy2 = "1";
    c.nu = 1e-2;
    c.alpha = -20.0;
    c.beta = 4.0;
    c.u0 = "0";
    c.v = "sin(pi*x1)*sin(pi*x2)";
    c.s_list = {4e-2, 2e-2, 1e-2};
    c.r_list = {0.05, 0.025, 0.0125};
    c.tol_kkt = 1e-9;
    c.max_iter = 2000;
    return c;
  }
  if (name == "cusp-green") {
    c.domain = mesh::PolygonDomain::rectangle({-1.0, -1.0}, {1.0, 1.0});
    c.target_h = 0.05;
    c.levels = 3;
    c.a0 = "0.5-y";
    c.a1 = "y-0.5";
    c.t_bar = 0.5;
    c.t = 0.45;
    c.y_bar = "(1-x1^2)*(1-x2^2)";
    c.y2 = "(1-x1^2)*(1-x2^2)-0.5*(x1-0.3)^2";
    c.phi = "x1^2+x2^2";
    c.green_phi = "exp(x1)+sin(2*x2)";
    c.green_v = "exp(x1)*x2^2";
    c.v = "x1^2";
    return c;
  }
  throw ConfigError("unknown scenario '" + name + "'");
}

std::function<double(int, const Vec2&)> manufactured_rhs(const pde::ControlProblem& p,
                                                         const expr::DiffExpr& y_star) {
  pde::PiecewiseC2Coefficient a = p.a;
  expr::DiffExpr b = p.b;
  return [a, b, y_star](int, const Vec2& q) {
    expr::EvalPoint ep{q.x(), q.y()};
    double ys = y_star.eval(ep);
    Vec2 gys(y_star.grad1(ep), y_star.grad2(ep));
    double c = b.eval(ep) + a.value(ys);
    Vec2 gc = Vec2(b.grad1(ep), b.grad2(ep)) + a.classical_deriv(ys) * gys;
    return -(gc.dot(gys) + c * y_star.laplacian_at(ep));
  };
}

NodalField manufactured_control(const pde::ControlProblem& p, MeshPtr m,
                                const expr::DiffExpr& y_star) {
  auto f = manufactured_rhs(p, y_star);
  return NodalField::interpolate(std::move(m),
                                 [&](const Vec2& q) { return f(0, q); });
}

// ---------------------------------------------------------------------------
// Command runners
// ---------------------------------------------------------------------------

namespace {

struct CommandResult {
  // primary scalar used by convergence studies: (metric name, value,
  // true when the metric is an error that should shrink)
  std::string metric_name = "";
  double metric = 0.0;
  bool metric_is_error = false;
};

double l2_error_vs(const NodalField& yh, const expr::DiffExpr& exact) {
  double e2 = mesh::integrate(*yh.mesh, [&](int t, const Vec2& q) {
    double d = yh.value_in_tri(t, q) - exact.eval({q.x(), q.y()});
    return d * d;
  });
  return std::sqrt(std::max(0.0, e2));
}

CommandResult cmd_solve_state(const ScenarioConfig& c, MeshPtr m, const fs::path& out) {
  auto problem = c.build_problem();
  NodalField y = NodalField::zero(m);
  pde::SolveStats stats;
  if (!c.u.empty()) {
    NodalField u = c.build_field(m, c.u, "fields.u");
    std::tie(y, stats) = pde::solve_state(problem, m, u, c.state_tol, c.state_max_iter);
  } else if (c.manufactured && !c.y_bar.empty()) {
    auto rhs = manufactured_rhs(problem, diff_field(c.y_bar, "fields.y_bar"));
    std::tie(y, stats) = pde::solve_state_load(problem, m, rhs, c.state_tol, c.state_max_iter);
  } else {
    throw ConfigError("solve-state needs fields.u or a manufactured fields.y_bar",
                      {"fields.u", "fields.y_bar"});
  }
  if (!stats.converged)
    throw pde::SolveError("state solve did not converge within max_iter");

  write_atomic(out / "mesh.json", m->to_json());
  write_atomic(out / "y.json", y.to_json());

  CommandResult res;
  std::ostringstream os;
  os << "{\"iterations\":" << stats.iterations << ",\"final_residual\":"
     << fmt(stats.final_residual) << ",\"converged\":" << (stats.converged ? "true" : "false");
  if (c.manufactured && !c.y_bar.empty()) {
    double err = l2_error_vs(y, diff_field(c.y_bar, "fields.y_bar"));
    os << ",\"l2_error\":" << fmt(err);
    res.metric_name = "l2_error";
    res.metric = err;
    res.metric_is_error = true;
  }
  os << "}";
  write_atomic(out / "state_stats.json", os.str());
  return res;
}

CommandResult cmd_solve_ocp(const ScenarioConfig& c, MeshPtr m, const fs::path& out) {
  auto problem = c.build_problem();
  NodalField u0 = c.u0.empty() ? NodalField::zero(m) : c.build_field(m, c.u0, "fields.u0");
  optimize::OptimizerParams params;
  params.max_iter = c.max_iter;
  params.tol_kkt = c.tol_kkt;
  params.state_tol = c.state_tol;
  params.state_max_iter = c.state_max_iter;
  params.linear_tol = c.linear_tol;
  auto [u_bar, stats] = optimize::projected_gradient_solve(problem, m, u0, params);

  std::ostringstream os;
  os << "{\"u_bar\":" << u_bar.to_json() << ",\"j\":" << fmt(stats.objective)
     << ",\"kkt_residual\":" << fmt(stats.kkt) << ",\"iterations\":" << stats.iterations
     << ",\"converged\":" << (stats.converged ? "true" : "false") << "}";
  write_atomic(out / "report.json", os.str());

  CommandResult res;
  res.metric_name = "kkt_residual";
  res.metric = stats.kkt;
  res.metric_is_error = true;
  return res;
}

CommandResult cmd_extract_levelset(const ScenarioConfig& c, MeshPtr m, const fs::path& out) {
  NodalField y = c.build_field(m, c.y_bar, "fields.y_bar");
  auto dec = levelset::extract_level_set(y, c.t);
  write_atomic(out / "levelset.json", levelset::decomposition_to_json(dec));

  CommandResult res;
  res.metric_name = "length";
  if (!dec.components.empty()) {
    int idx = c.component_index;
    if (idx < 0 || idx >= static_cast<int>(dec.components.size())) idx = 0;
    res.metric = dec.components[idx].length;
  }
  res.metric_is_error = false;
  return res;
}

CommandResult cmd_verify_green(const ScenarioConfig& c, MeshPtr m, const fs::path& out) {
  NodalField y1 = c.build_field(m, c.y_bar, "fields.y_bar");
  NodalField y2 = c.build_field(m, c.y2, "fields.y2");
  const std::string& phi_text = c.green_phi.empty() ? c.phi : c.green_phi;
  const std::string& v_text = c.green_v.empty() ? c.v : c.green_v;
  if (phi_text.empty()) throw ConfigError("missing field: fields.phi", {"fields.phi"});
  if (v_text.empty()) throw ConfigError("missing field: fields.v", {"fields.v"});
  expr::DiffExpr phi = diff_field(phi_text, "fields.phi");
  expr::DiffExpr v = diff_field(v_text, "fields.v");
  double t = c.green_t.value_or(c.t);
  auto res = green::green_residual(y1, y2, t, green::PointField::from_diff_expr(v), phi,
                                   c.theta_grad);
  std::ostringstream os;
  os << "h_max,lhs,rhs,residual\n"
     << fmt(m->h_max) << "," << fmt(res.lhs) << "," << fmt(res.rhs) << "," << fmt(res.residual)
     << "\n";
  write_atomic(out / "green.csv", os.str());

  CommandResult cr;
  cr.metric_name = "residual";
  cr.metric = res.residual;
  cr.metric_is_error = true;
  return cr;
}

CommandResult cmd_jump_functional(const ScenarioConfig& c, MeshPtr m, const fs::path& out) {
  if (c.r_list.empty()) throw ConfigError("missing params.r_list", {"params.r_list"});
  NodalField y = c.build_field(m, c.y_bar, "fields.y_bar");
  auto problem = c.build_problem();
  auto est = levelset::jump_functional(y, problem.a.t_bar, problem.a.sigma0, c.r_list);

  std::ostringstream csv;
  csv << "r,estimate\n";
  for (std::size_t i = 0; i < est.r_values.size(); ++i)
    csv << fmt(est.r_values[i]) << "," << fmt(est.estimates[i]) << "\n";
  write_atomic(out / "jump.csv", csv.str());

  std::ostringstream js;
  js << "{\"sigma0\":" << fmt(problem.a.sigma0) << ",\"extrapolated\":" << fmt(est.extrapolated)
     << "}";
  write_atomic(out / "jump.json", js.str());

  CommandResult cr;
  cr.metric_name = "extrapolated";
  cr.metric = est.extrapolated;
  cr.metric_is_error = false;
  return cr;
}

void write_limit_csv(const fs::path& path, const curvature::LimitExperiment& ex) {
  std::ostringstream os;
  os << "s,value,target,abs_error\n";
  for (std::size_t i = 0; i < ex.s_list.size(); ++i)
    os << fmt(ex.s_list[i]) << "," << fmt(ex.values[i]) << "," << fmt(ex.target) << ","
       << fmt(ex.errors[i]) << "\n";
  write_atomic(path, os.str());
}

CommandResult cmd_an_limits(const ScenarioConfig& c, MeshPtr m, const fs::path& out) {
  if (c.s_list.empty()) throw ConfigError("missing params.s_list", {"params.s_list"});
  NodalField y = c.build_field(m, c.y_bar, "fields.y_bar");
  NodalField w = c.build_field(m, c.w, "fields.w");
  expr::DiffExpr phi = diff_field(c.phi.empty()
                                      ? throw ConfigError("missing field: fields.phi",
                                                          {"fields.phi"})
                                      : c.phi,
                                  "fields.phi");
  auto gphi = curvature::GradField::from_diff_expr(phi);
  auto an = curvature::an_experiment(y, w, gphi, c.t_bar, c.component_index, c.epsilon, c.s_list,
                                     c.theta_grad, c.delta);
  auto an_tilde = curvature::an_tilde_experiment(y, w, gphi, c.t_bar, c.component_index,
                                                 c.epsilon, c.s_list, c.theta_grad, c.delta);
  auto combined = curvature::combined_limit(y, w, gphi, c.t_bar, c.component_index, c.epsilon,
                                            c.s_list, c.theta_grad, c.delta);
  write_limit_csv(out / "an.csv", an);
  write_limit_csv(out / "an_tilde.csv", an_tilde);
  write_limit_csv(out / "an_combined.csv", combined);

  CommandResult cr;
  cr.metric_name = "an_final_abs_error";
  cr.metric = an.errors.back();
  cr.metric_is_error = true;
  return cr;
}

CommandResult cmd_curvature(const ScenarioConfig& c, MeshPtr m, const fs::path& out) {
  auto problem = c.build_problem();
  NodalField u = c.u.empty() ? NodalField::zero(m) : c.build_field(m, c.u, "fields.u");
  NodalField v = c.build_field(m, c.v, "fields.v");
  auto rep = curvature::compute_Q_total(problem, m, u, v, c.theta_grad, c.linear_tol,
                                        c.state_tol, c.state_max_iter);
  std::ostringstream os;
  os << "{\"q_s\":" << fmt(rep.q_s) << ",\"q_1\":" << fmt(rep.q_1) << ",\"q_2\":" << fmt(rep.q_2)
     << ",\"total\":" << fmt(rep.total) << ",\"component_contributions\":[";
  for (std::size_t i = 0; i < rep.detail.component_contributions.size(); ++i) {
    if (i) os << ",";
    os << fmt(rep.detail.component_contributions[i]);
  }
  os << "],\"filtered_components\":[";
  for (std::size_t i = 0; i < rep.detail.filtered_components.size(); ++i) {
    if (i) os << ",";
    os << rep.detail.filtered_components[i];
  }
  os << "],\"empty_levelset\":" << (rep.detail.empty_levelset ? "true" : "false") << "}";
  write_atomic(out / "curvature.json", os.str());

  CommandResult cr;
  cr.metric_name = "q_total";
  cr.metric = rep.total;
  cr.metric_is_error = false;
  return cr;
}

CommandResult cmd_check_soc(const ScenarioConfig& c, MeshPtr m, const fs::path& out,
                            unsigned seed) {
  auto problem = c.build_problem();
  NodalField u0 = c.u0.empty() ? NodalField::zero(m) : c.build_field(m, c.u0, "fields.u0");
  optimize::OptimizerParams params;
  params.max_iter = c.max_iter;
  params.tol_kkt = c.tol_kkt;
  params.state_tol = c.state_tol;
  params.state_max_iter = c.state_max_iter;
  params.linear_tol = c.linear_tol;
  auto [u_bar, stats] = optimize::projected_gradient_solve(problem, m, u0, params);
  if (!stats.converged)
    throw pde::SolveError("projected gradient did not reach tol_kkt; cannot check SOC");

  optimize::SOCOptions opts;
  opts.mode = c.soc_mode == "sufficient" ? optimize::SOCMode::Sufficient
                                         : optimize::SOCMode::Necessary;
  opts.tol_q = c.tol_q;
  opts.tol_active = c.tol_active;
  opts.theta_grad = c.theta_grad;
  opts.tol_kkt = c.tol_kkt;
  opts.state_tol = c.state_tol;
  opts.state_max_iter = c.state_max_iter;
  opts.linear_tol = c.linear_tol;
  auto reports = optimize::check_soc(problem, m, u_bar, c.soc_directions, seed, opts);

  std::ostringstream os;
  os << "direction_id,q_s,q_1,q_2,q_total,cone_violation\n";
  double min_q = std::numeric_limits<double>::infinity();
  for (const auto& r : reports) {
    if (r.skipped) continue;
    os << r.direction_id << "," << fmt(r.q_s) << "," << fmt(r.q_1) << "," << fmt(r.q_2) << ","
       << fmt(r.q_total) << "," << fmt(r.cone_violation) << "\n";
    min_q = std::min(min_q, r.q_total);
  }
  write_atomic(out / "soc.csv", os.str());

  std::ostringstream js;
  js << "{\"mode\":\"" << c.soc_mode << "\",\"min_q_total\":" << fmt(min_q) << ",\"verdicts\":[";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (i) js << ",";
    js << "\"" << reports[i].verdict << "\"";
  }
  js << "]}";
  write_atomic(out / "soc.json", js.str());

  CommandResult cr;
  cr.metric_name = "min_q_total";
  cr.metric = min_q;
  cr.metric_is_error = false;
  return cr;
}

CommandResult dispatch(const std::string& command, const ScenarioConfig& c, MeshPtr m,
                       const fs::path& out, unsigned seed) {
  if (command == "solve-state") return cmd_solve_state(c, m, out);
  if (command == "solve-ocp") return cmd_solve_ocp(c, m, out);
  if (command == "extract-levelset") return cmd_extract_levelset(c, m, out);
  if (command == "verify-green") return cmd_verify_green(c, m, out);
  if (command == "jump-functional") return cmd_jump_functional(c, m, out);
  if (command == "an-limits") return cmd_an_limits(c, m, out);
  if (command == "curvature") return cmd_curvature(c, m, out);
  if (command == "check-soc") return cmd_check_soc(c, m, out, seed);
  throw std::invalid_argument("unknown command '" + command + "'");
}

int run_study(const std::string& subcommand, const ScenarioConfig& c, const fs::path& out,
              int levels_override, unsigned seed) {
  int levels = levels_override > 0 ? levels_override : c.levels;
  std::vector<double> h_values, metrics;
  std::string metric_name;
  bool is_error = false;
  for (int level = 0; level < levels; ++level) {
    MeshPtr m = c.build_mesh_level(level);
    fs::path level_dir = out / ("level_" + std::to_string(level));
    CommandResult r = dispatch(subcommand, c, m, level_dir, seed);
    if (r.metric_name.empty())
      throw ConfigError("command '" + subcommand + "' does not expose a study metric");
    metric_name = r.metric_name;
    is_error = r.metric_is_error;
    h_values.push_back(m->h_max);
    metrics.push_back(r.metric);
  }
  std::ostringstream os;
  os << "level,h_max," << metric_name << ",order\n";
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    double order = std::numeric_limits<double>::quiet_NaN();
    if (is_error && i > 0 && metrics[i] > 0.0 && metrics[i - 1] > 0.0)
      order = std::log(metrics[i - 1] / metrics[i]) / std::log(h_values[i - 1] / h_values[i]);
    if (!is_error && i > 1) {
      double d0 = std::abs(metrics[i - 1] - metrics[i - 2]);
      double d1 = std::abs(metrics[i] - metrics[i - 1]);
      if (d0 > 0.0 && d1 > 0.0)
        order = std::log(d0 / d1) / std::log(h_values[i - 1] / h_values[i]);
    }
    os << i << "," << fmt(h_values[i]) << "," << fmt(metrics[i]) << ","
       << (std::isnan(order) ? std::string("nan") : fmt(order)) << "\n";
  }
  write_atomic(out / "study.csv", os.str());
  return 0;
}

}  // namespace

int run(const std::string& command, const std::string& subcommand, const std::string& config,
        const std::string& out_dir, int levels_override, unsigned seed) {
  try {
    ScenarioConfig c = ScenarioConfig::load(config);
    fs::path out(out_dir);
    if (command == "convergence-study") {
      if (subcommand.empty()) {
        std::cerr << "convergence-study needs a subcommand\n";
        return 1;
      }
      return run_study(subcommand, c, out, levels_override, seed);
    }
    MeshPtr m = c.build_mesh_level(levels_override > 0 ? levels_override - 1 : 0);
    dispatch(command, c, m, out, seed);
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const expr::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace kinkopt::scenario
