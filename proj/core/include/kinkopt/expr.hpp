#pragma once

// Analytic scalar fields in the variables x1, x2 (and y for state-dependent
// integrands): recursive-descent parser, evaluator, and symbolic derivatives.
//
// Grammar:
//   expr   := term (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := ("-")? power
//   power  := atom ("^" factor)?
//   atom   := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")"
// IDENT in { x1, x2, y, pi, sin, cos, exp, sqrt, abs, min, max, sgn }.
// sgn is an internal extension with sgn(0) = 0; it carries the derivative of
// abs/min/max and is accepted on re-parse so printed derivatives round-trip.

#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace kinkopt::expr {

enum class Var { X1, X2, Y };

enum class BinaryOp { Add, Sub, Mul, Div, Pow };

enum class Func { Sin, Cos, Exp, Sqrt, Abs, Sgn, Min, Max };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  enum class Kind { Number, Pi, Variable, Neg, Binary, Call };
  Kind kind;
  double number = 0.0;  // Kind::Number, always >= 0 (sign lives in Neg)
  Var var = Var::X1;    // Kind::Variable
  BinaryOp op = BinaryOp::Add;
  Func func = Func::Sin;
  NodePtr a, b;  // Neg/unary Call: a; Binary and binary Call: a, b
};

/// Evaluation point; y may be left NaN for pure spatial fields.
struct EvalPoint {
  double x1 = 0.0;
  double x2 = 0.0;
  double y = std::numeric_limits<double>::quiet_NaN();
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string msg, std::size_t offset, std::string expected);
  std::size_t offset;    ///< byte offset into the input
  std::string expected;  ///< human-readable expected-token set
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable expression tree; cheap to copy, safe for concurrent evaluation.
class Expr {
 public:
  Expr() = default;
  explicit Expr(NodePtr root) : root_(std::move(root)) {}

  bool valid() const { return root_ != nullptr; }
  const NodePtr& root() const { return root_; }

  double eval(const EvalPoint& p) const;
  std::string to_string() const;

  /// true when no Variable node matching v occurs in the tree
  bool independent_of(Var v) const;

 private:
  NodePtr root_;
};

Expr parse_expr(const std::string& text);
Expr differentiate(const Expr& e, Var v);
Expr laplacian(const Expr& e);
double eval_field(const Expr& e, const EvalPoint& p);
bool structurally_equal(const Expr& lhs, const Expr& rhs);

/// A field bundled with its symbolic first derivatives and Laplacian.
struct DiffExpr {
  Expr value;
  Expr dx1;
  Expr dx2;
  Expr lap;

  static DiffExpr build(const Expr& e);
  static DiffExpr build(const std::string& text) { return build(parse_expr(text)); }

  double eval(const EvalPoint& p) const { return value.eval(p); }
  double grad1(const EvalPoint& p) const { return dx1.eval(p); }
  double grad2(const EvalPoint& p) const { return dx2.eval(p); }
  double laplacian_at(const EvalPoint& p) const { return lap.eval(p); }
};

}  // namespace kinkopt::expr
