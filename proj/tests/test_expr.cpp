#include <cmath>
#include <random>
#include <thread>

#include "doctest.h"
#include "kinkopt/expr.hpp"

using namespace kinkopt;
using expr::EvalPoint;
using expr::Expr;
using expr::Var;

namespace {

double at(const Expr& e, double x1, double x2, double y = 0.0) {
  return e.eval({x1, x2, y});
}

}  // namespace

TEST_CASE("precedence and associativity") {
  CHECK(at(expr::parse_expr("2+3*4"), 0, 0) == doctest::Approx(14.0));
  CHECK(at(expr::parse_expr("2*3+4"), 0, 0) == doctest::Approx(10.0));
  CHECK(at(expr::parse_expr("2-3-4"), 0, 0) == doctest::Approx(-5.0));
  CHECK(at(expr::parse_expr("8/4/2"), 0, 0) == doctest::Approx(1.0));
  CHECK(at(expr::parse_expr("2^3^2"), 0, 0) == doctest::Approx(512.0));  // right-assoc
  CHECK(at(expr::parse_expr("-2^2"), 0, 0) == doctest::Approx(-4.0));
  CHECK(at(expr::parse_expr("2^-1"), 0, 0) == doctest::Approx(0.5));
  CHECK(at(expr::parse_expr("x1^2 + sin(x2)"), 0, 0) == doctest::Approx(0.0));
  CHECK(at(expr::parse_expr("abs(x1 - 1)"), 3, 0) == doctest::Approx(2.0));
  CHECK(at(expr::parse_expr("min(x1, x2)"), 2, -1) == doctest::Approx(-1.0));
  CHECK(at(expr::parse_expr("max(x1, x2)"), 2, -1) == doctest::Approx(2.0));
  CHECK(at(expr::parse_expr("pi"), 0, 0) == doctest::Approx(M_PI));
  CHECK(at(expr::parse_expr("1e-2 + 2.5E3"), 0, 0) == doctest::Approx(2500.01));
}

TEST_CASE("parse errors carry byte offsets") {
  CHECK_THROWS_AS(expr::parse_expr(""), expr::ParseError);
  try {
    expr::parse_expr("x1 + foo(x2)");
    FAIL("expected ParseError");
  } catch (const expr::ParseError& e) {
    CHECK(e.offset == 5);
    CHECK(std::string(e.what()).find("foo") != std::string::npos);
  }
  try {
    expr::parse_expr("2 + * 3");
    FAIL("expected ParseError");
  } catch (const expr::ParseError& e) {
    CHECK(e.offset == 4);
    CHECK(!e.expected.empty());
  }
  CHECK_THROWS_AS(expr::parse_expr("sin(x1, x2)"), expr::ParseError);
  CHECK_THROWS_AS(expr::parse_expr("min(x1)"), expr::ParseError);
  CHECK_THROWS_AS(expr::parse_expr("(x1"), expr::ParseError);
  CHECK_THROWS_AS(expr::parse_expr("x1 x2"), expr::ParseError);
}

TEST_CASE("evaluation domain errors") {
  CHECK_THROWS_AS(at(expr::parse_expr("1/(x1)"), 0, 0), expr::EvalError);
  CHECK_THROWS_AS(at(expr::parse_expr("sqrt(x1)"), -1, 0), expr::EvalError);
  CHECK_THROWS_AS(at(expr::parse_expr("exp(x1)"), 1e4, 0), expr::EvalError);
  CHECK(at(expr::parse_expr("exp(0*x1)"), 123, 7) == doctest::Approx(1.0));
  CHECK(at(expr::parse_expr("(1-x1^2)*(1-x2^2)"), 0, 0) == doctest::Approx(1.0));
}

TEST_CASE("round-trip parse-print-parse is structural identity") {
  std::vector<std::string> corpus = {
      "2+3*4", "x1", "x2", "y", "pi", "1.5", "2.5e-3", "x1+x2", "x1-x2-x2", "x1*x2/x1",
      "x1^2", "x1^2^3", "-x1", "-x1^2", "-(x1+x2)", "x1*-x2", "x1--x2", "2^-3",
      "sin(x1)", "cos(x2*pi)", "exp(-x1^2)", "sqrt(abs(x1))", "abs(x1-1)", "sgn(x1)",
      "min(x1,x2)", "max(x1^2,x2^2)", "min(max(x1,x2),1)", "(x1+x2)*(x1-x2)",
      "1/(1+x1^2)", "x1/(x2-3)", "(1-x1^2)*(1-x2^2)", "sin(pi*x1)*sin(pi*x2)",
      "0.5*(y-0.3*sin(pi*x1)*sin(pi*x2))^2", "y-0.5", "0.5-y", "y^2", "abs(y-0.5)",
      "x1^2+x2^2", "x1*(1-x1)*x2*(1-x2)", "2*x1+3*x2-4", "x1^(1+1)",
      "-(x1*x2)", "x1-(x2+1)", "x1/(x2/2)", "(x1/x2)/2", "x1^(x2*0+2)",
      "sin(cos(exp(x1)))", "sqrt(x1^2+x2^2+1)", "abs(abs(x1)-abs(x2))",
      "max(0,min(1,x1))", "1+2+3+4+5", "x1*x2*x1*x2",
  };
  CHECK(corpus.size() >= 50);
  for (const auto& text : corpus) {
    CAPTURE(text);
    Expr once = expr::parse_expr(text);
    Expr twice = expr::parse_expr(once.to_string());
    CHECK(expr::structurally_equal(once, twice));
  }
}

TEST_CASE("symbolic derivative examples") {
  Expr e = expr::parse_expr("x1*x2");
  Expr d = expr::differentiate(e, Var::X1);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 20; ++i) {
    double x1 = u(rng), x2 = u(rng);
    CHECK(at(d, x1, x2) == doctest::Approx(x2).epsilon(1e-12));
  }
  CHECK(at(expr::laplacian(expr::parse_expr("x1^2 + x2^2")), 0.3, -0.7) == doctest::Approx(4.0));
  CHECK(at(expr::differentiate(expr::parse_expr("sin(x1)"), Var::X1), 0, 0) ==
        doctest::Approx(1.0));
  CHECK_THROWS_AS(expr::differentiate(expr::parse_expr("x1^x2"), Var::X1), expr::EvalError);
}

TEST_CASE("derivatives match central differences away from kinks") {
  std::vector<std::string> fields = {
      "sin(pi*x1)*sin(pi*x2)", "(1-x1^2)*(1-x2^2)", "exp(-(x1^2+x2^2))",
      "sqrt(x1^2+x2^2+1)",     "x1^3-2*x1*x2+x2^2", "abs(x1-0.5)*x2",
      "min(x1,x2^2)",          "max(x1*x2,-1)",     "cos(x1)/(2+sin(x2))",
  };
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  const double h = 1e-5;
  for (const auto& text : fields) {
    expr::DiffExpr d = expr::DiffExpr::build(text);
    int checked = 0;
    int tries = 0;
    while (checked < 100 && tries < 2000) {
      ++tries;
      double x1 = u(rng), x2 = u(rng);
      // stay away from the kink lines of abs/min/max arguments
      if (text.find("abs(x1-0.5)") != std::string::npos && std::abs(x1 - 0.5) < 10 * h) continue;
      if (text.find("min(x1,x2^2)") != std::string::npos && std::abs(x1 - x2 * x2) < 10 * h)
        continue;
      if (text.find("max(x1*x2,-1)") != std::string::npos && std::abs(x1 * x2 + 1) < 10 * h)
        continue;
      double fd1 = (d.eval({x1 + h, x2}) - d.eval({x1 - h, x2})) / (2 * h);
      double fd2 = (d.eval({x1, x2 + h}) - d.eval({x1, x2 - h})) / (2 * h);
      double scale1 = std::max(1.0, std::abs(fd1));
      double scale2 = std::max(1.0, std::abs(fd2));
      CHECK(std::abs(d.grad1({x1, x2}) - fd1) / scale1 <= 1e-6);
      CHECK(std::abs(d.grad2({x1, x2}) - fd2) / scale2 <= 1e-6);
      ++checked;
    }
    CHECK(checked == 100);
  }
}

TEST_CASE("abs derivative convention sign(0) = 0") {
  Expr d = expr::differentiate(expr::parse_expr("abs(x1)"), Var::X1);
  CHECK(at(d, 2, 0) == doctest::Approx(1.0));
  CHECK(at(d, -2, 0) == doctest::Approx(-1.0));
  CHECK(at(d, 0, 0) == doctest::Approx(0.0));
}

TEST_CASE("concurrent evaluation is deterministic") {
  Expr e = expr::parse_expr("sin(pi*x1)*exp(x2)/(1+x1^2)");
  std::vector<EvalPoint> pts;
  for (int i = 0; i < 64; ++i) pts.push_back({0.01 * i, -0.02 * i});
  std::vector<double> ref;
  for (const auto& p : pts) ref.push_back(e.eval(p));

  std::vector<std::vector<double>> results(4);
  std::vector<std::thread> threads;
  for (int k = 0; k < 4; ++k)
    threads.emplace_back([&, k] {
      for (const auto& p : pts) results[k].push_back(e.eval(p));
    });
  for (auto& t : threads) t.join();
  for (const auto& r : results)
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(r[i] == ref[i]);  // bit-identical
}
