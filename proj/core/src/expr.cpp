#include "kinkopt/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace kinkopt::expr {

ParseError::ParseError(std::string msg, std::size_t off, std::string exp)
    : std::runtime_error(std::move(msg)), offset(off), expected(std::move(exp)) {}

namespace {

NodePtr make(Node n) { return std::make_shared<const Node>(std::move(n)); }

NodePtr num(double v) {
  if (v < 0.0) {
    Node neg{Node::Kind::Neg};
    neg.a = make(Node{Node::Kind::Number, -v});
    return make(std::move(neg));
  }
  return make(Node{Node::Kind::Number, v});
}

bool is_number(const NodePtr& n, double v) {
  return n->kind == Node::Kind::Number && n->number == v;
}

bool is_zero(const NodePtr& n) { return is_number(n, 0.0); }
bool is_one(const NodePtr& n) { return is_number(n, 1.0); }

NodePtr neg(const NodePtr& a) {
  if (is_zero(a)) return a;
  if (a->kind == Node::Kind::Neg) return a->a;
  Node n{Node::Kind::Neg};
  n.a = a;
  return make(std::move(n));
}

NodePtr binary(BinaryOp op, NodePtr a, NodePtr b) {
  Node n{Node::Kind::Binary};
  n.op = op;
  n.a = std::move(a);
  n.b = std::move(b);
  return make(std::move(n));
}

// Folding below only ever runs on derivative trees we build ourselves; parsed
// input is kept verbatim.
NodePtr add(const NodePtr& a, const NodePtr& b) {
  if (is_zero(a)) return b;
  if (is_zero(b)) return a;
  if (a->kind == Node::Kind::Number && b->kind == Node::Kind::Number)
    return num(a->number + b->number);
  return binary(BinaryOp::Add, a, b);
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  if (is_zero(b)) return a;
  if (is_zero(a)) return neg(b);
  if (a->kind == Node::Kind::Number && b->kind == Node::Kind::Number)
    return num(a->number - b->number);
  return binary(BinaryOp::Sub, a, b);
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  if (is_zero(a) || is_zero(b)) return num(0.0);
  if (is_one(a)) return b;
  if (is_one(b)) return a;
  if (a->kind == Node::Kind::Number && b->kind == Node::Kind::Number)
    return num(a->number * b->number);
  return binary(BinaryOp::Mul, a, b);
}

NodePtr div(const NodePtr& a, const NodePtr& b) {
  if (is_zero(a)) return a;
  if (is_one(b)) return a;
  return binary(BinaryOp::Div, a, b);
}

NodePtr pow_(const NodePtr& a, const NodePtr& b) {
  if (is_one(b)) return a;
  if (is_zero(b)) return num(1.0);
  return binary(BinaryOp::Pow, a, b);
}

NodePtr call1(Func f, NodePtr a) {
  Node n{Node::Kind::Call};
  n.func = f;
  n.a = std::move(a);
  return make(std::move(n));
}

NodePtr call2(Func f, NodePtr a, NodePtr b) {
  Node n{Node::Kind::Call};
  n.func = f;
  n.a = std::move(a);
  n.b = std::move(b);
  return make(std::move(n));
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
  Tok kind;
  double number = 0.0;
  std::string ident;
  std::size_t offset = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& s) : s_(s) { advance(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    tok_.offset = pos_;
    if (pos_ >= s_.size()) {
      tok_.kind = Tok::End;
      return;
    }
    char c = s_[pos_];
    switch (c) {
      case '+': tok_.kind = Tok::Plus; ++pos_; return;
      case '-': tok_.kind = Tok::Minus; ++pos_; return;
      case '*': tok_.kind = Tok::Star; ++pos_; return;
      case '/': tok_.kind = Tok::Slash; ++pos_; return;
      case '^': tok_.kind = Tok::Caret; ++pos_; return;
      case '(': tok_.kind = Tok::LParen; ++pos_; return;
      case ')': tok_.kind = Tok::RParen; ++pos_; return;
      case ',': tok_.kind = Tok::Comma; ++pos_; return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      lex_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      tok_.kind = Tok::Ident;
      tok_.ident = s_.substr(start, pos_ - start);
      return;
    }
    throw ParseError("unexpected character '" + std::string(1, c) + "' at offset " +
                         std::to_string(pos_),
                     pos_, "number, identifier or operator");
  }

  void lex_number() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t mark = pos_;
      ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      } else {
        pos_ = mark;  // bare 'e' belongs to the next token
      }
    }
    std::string text = s_.substr(start, pos_ - start);
    if (text == ".")
      throw ParseError("malformed number at offset " + std::to_string(start), start, "digits");
    tok_.kind = Tok::Number;
    tok_.number = std::stod(text);
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  Token tok_;
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

const std::map<std::string, Func, std::less<>>& function_table() {
  static const std::map<std::string, Func, std::less<>> table = {
      {"sin", Func::Sin},   {"cos", Func::Cos}, {"exp", Func::Exp}, {"sqrt", Func::Sqrt},
      {"abs", Func::Abs},   {"sgn", Func::Sgn}, {"min", Func::Min}, {"max", Func::Max},
  };
  return table;
}

int function_arity(Func f) { return (f == Func::Min || f == Func::Max) ? 2 : 1; }

class Parser {
 public:
  explicit Parser(const std::string& s) : lex_(s) {}

  NodePtr run() {
    NodePtr e = expr();
    const Token& t = lex_.peek();
    if (t.kind != Tok::End)
      throw ParseError("trailing input at offset " + std::to_string(t.offset), t.offset,
                       "'+', '-', '*', '/', '^' or end of input");
    return e;
  }

 private:
  NodePtr expr() {
    NodePtr lhs = term();
    while (true) {
      Tok k = lex_.peek().kind;
      if (k == Tok::Plus || k == Tok::Minus) {
        lex_.take();
        NodePtr rhs = term();
        lhs = binary(k == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub, lhs, rhs);
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = factor();
    while (true) {
      Tok k = lex_.peek().kind;
      if (k == Tok::Star || k == Tok::Slash) {
        lex_.take();
        NodePtr rhs = factor();
        lhs = binary(k == Tok::Star ? BinaryOp::Mul : BinaryOp::Div, lhs, rhs);
      } else {
        return lhs;
      }
    }
  }

  NodePtr factor() {
    if (lex_.peek().kind == Tok::Minus) {
      lex_.take();
      NodePtr a = power();
      Node n{Node::Kind::Neg};
      n.a = std::move(a);
      return make(std::move(n));
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (lex_.peek().kind == Tok::Caret) {
      lex_.take();
      NodePtr e = factor();  // right-associative
      return binary(BinaryOp::Pow, base, e);
    }
    return base;
  }

  NodePtr atom() {
    Token t = lex_.take();
    switch (t.kind) {
      case Tok::Number:
        return make(Node{Node::Kind::Number, t.number});
      case Tok::LParen: {
        NodePtr e = expr();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Ident:
        return ident(t);
      default:
        throw ParseError("unexpected token at offset " + std::to_string(t.offset), t.offset,
                         "number, identifier, '(' or '-'");
    }
  }

  NodePtr ident(const Token& t) {
    if (t.ident == "x1") return variable(Var::X1);
    if (t.ident == "x2") return variable(Var::X2);
    if (t.ident == "y") return variable(Var::Y);
    if (t.ident == "pi") return make(Node{Node::Kind::Pi});
    auto it = function_table().find(t.ident);
    if (it == function_table().end())
      throw ParseError("unknown identifier '" + t.ident + "' at offset " + std::to_string(t.offset),
                       t.offset, "x1, x2, y, pi or a function name");
    expect(Tok::LParen, "'('");
    std::vector<NodePtr> args;
    args.push_back(expr());
    while (lex_.peek().kind == Tok::Comma) {
      lex_.take();
      args.push_back(expr());
    }
    expect(Tok::RParen, "')' or ','");
    int arity = function_arity(it->second);
    if (static_cast<int>(args.size()) != arity)
      throw ParseError("'" + t.ident + "' expects " + std::to_string(arity) + " argument(s) (got " +
                           std::to_string(args.size()) + ") at offset " + std::to_string(t.offset),
                       t.offset, std::to_string(arity) + " argument(s)");
    return arity == 1 ? call1(it->second, args[0]) : call2(it->second, args[0], args[1]);
  }

  static NodePtr variable(Var v) {
    Node n{Node::Kind::Variable};
    n.var = v;
    return make(std::move(n));
  }

  void expect(Tok k, const std::string& what) {
    const Token& t = lex_.peek();
    if (t.kind != k)
      throw ParseError("expected " + what + " at offset " + std::to_string(t.offset), t.offset,
                       what);
    lex_.take();
  }

  Lexer lex_;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

double check_finite(double v) {
  if (!std::isfinite(v)) throw EvalError("non-finite value in expression evaluation");
  return v;
}

double eval_node(const Node& n, const EvalPoint& p) {
  switch (n.kind) {
    case Node::Kind::Number:
      return n.number;
    case Node::Kind::Pi:
      return M_PI;
    case Node::Kind::Variable:
      switch (n.var) {
        case Var::X1: return p.x1;
        case Var::X2: return p.x2;
        case Var::Y:
          if (std::isnan(p.y)) throw EvalError("variable y evaluated without a value");
          return p.y;
      }
      return 0.0;
    case Node::Kind::Neg:
      return -eval_node(*n.a, p);
    case Node::Kind::Binary: {
      double a = eval_node(*n.a, p);
      double b = eval_node(*n.b, p);
      switch (n.op) {
        case BinaryOp::Add: return check_finite(a + b);
        case BinaryOp::Sub: return check_finite(a - b);
        case BinaryOp::Mul: return check_finite(a * b);
        case BinaryOp::Div:
          if (b == 0.0) throw EvalError("division by zero");
          return check_finite(a / b);
        case BinaryOp::Pow:
          return check_finite(std::pow(a, b));
      }
      return 0.0;
    }
    case Node::Kind::Call: {
      double a = eval_node(*n.a, p);
      switch (n.func) {
        case Func::Sin: return std::sin(a);
        case Func::Cos: return std::cos(a);
        case Func::Exp: return check_finite(std::exp(a));
        case Func::Sqrt:
          if (a < 0.0) throw EvalError("sqrt of negative value");
          return std::sqrt(a);
        case Func::Abs: return std::abs(a);
        case Func::Sgn: return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
        case Func::Min: return std::min(a, eval_node(*n.b, p));
        case Func::Max: return std::max(a, eval_node(*n.b, p));
      }
      return 0.0;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Printing; parenthesization chosen so print/parse round-trips structurally.
// ---------------------------------------------------------------------------

std::string number_to_string(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* func_name(Func f) {
  switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Exp: return "exp";
    case Func::Sqrt: return "sqrt";
    case Func::Abs: return "abs";
    case Func::Sgn: return "sgn";
    case Func::Min: return "min";
    case Func::Max: return "max";
  }
  return "?";
}

bool is_atom(const Node& n) {
  return n.kind == Node::Kind::Number || n.kind == Node::Kind::Pi ||
         n.kind == Node::Kind::Variable || n.kind == Node::Kind::Call;
}

bool is_add_sub(const Node& n) {
  return n.kind == Node::Kind::Binary && (n.op == BinaryOp::Add || n.op == BinaryOp::Sub);
}

bool is_mul_div(const Node& n) {
  return n.kind == Node::Kind::Binary && (n.op == BinaryOp::Mul || n.op == BinaryOp::Div);
}

bool is_pow(const Node& n) { return n.kind == Node::Kind::Binary && n.op == BinaryOp::Pow; }

void print_node(const Node& n, std::string& out);

void print_wrapped(const Node& n, bool parens, std::string& out) {
  if (parens) out += '(';
  print_node(n, out);
  if (parens) out += ')';
}

void print_node(const Node& n, std::string& out) {
  switch (n.kind) {
    case Node::Kind::Number:
      out += number_to_string(n.number);
      return;
    case Node::Kind::Pi:
      out += "pi";
      return;
    case Node::Kind::Variable:
      out += (n.var == Var::X1 ? "x1" : (n.var == Var::X2 ? "x2" : "y"));
      return;
    case Node::Kind::Neg:
      out += '-';
      // child sits in "power" position: leading '-' or +-*/ need parens
      print_wrapped(*n.a, is_add_sub(*n.a) || is_mul_div(*n.a) || n.a->kind == Node::Kind::Neg,
                    out);
      return;
    case Node::Kind::Binary:
      switch (n.op) {
        case BinaryOp::Add:
          print_node(*n.a, out);
          out += '+';
          print_wrapped(*n.b, is_add_sub(*n.b), out);
          return;
        case BinaryOp::Sub:
          print_node(*n.a, out);
          out += '-';
          print_wrapped(*n.b, is_add_sub(*n.b), out);
          return;
        case BinaryOp::Mul:
        case BinaryOp::Div:
          print_wrapped(*n.a, is_add_sub(*n.a), out);
          out += (n.op == BinaryOp::Mul ? '*' : '/');
          print_wrapped(*n.b, is_add_sub(*n.b) || is_mul_div(*n.b), out);
          return;
        case BinaryOp::Pow:
          print_wrapped(*n.a, !is_atom(*n.a), out);
          out += '^';
          print_wrapped(*n.b, is_add_sub(*n.b) || is_mul_div(*n.b), out);
          return;
      }
      return;
    case Node::Kind::Call:
      out += func_name(n.func);
      out += '(';
      print_node(*n.a, out);
      if (n.b) {
        out += ',';
        print_node(*n.b, out);
      }
      out += ')';
      return;
  }
}

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

bool constant_tree(const Node& n) {
  switch (n.kind) {
    case Node::Kind::Number:
    case Node::Kind::Pi:
      return true;
    case Node::Kind::Variable:
      return false;
    case Node::Kind::Neg:
      return constant_tree(*n.a);
    case Node::Kind::Binary:
      return constant_tree(*n.a) && constant_tree(*n.b);
    case Node::Kind::Call:
      return constant_tree(*n.a) && (!n.b || constant_tree(*n.b));
  }
  return false;
}

NodePtr diff_node(const NodePtr& n, Var v);

NodePtr diff_call(const NodePtr& n, Var v) {
  const NodePtr& g = n->a;
  NodePtr dg = diff_node(g, v);
  switch (n->func) {
    case Func::Sin:
      return mul(call1(Func::Cos, g), dg);
    case Func::Cos:
      return neg(mul(call1(Func::Sin, g), dg));
    case Func::Exp:
      return mul(call1(Func::Exp, g), dg);
    case Func::Sqrt:
      return div(dg, mul(num(2.0), call1(Func::Sqrt, g)));
    case Func::Abs:
      // d|g| = sgn(g) g', sgn(0) = 0
      return mul(call1(Func::Sgn, g), dg);
    case Func::Sgn:
      return num(0.0);
    case Func::Min:
    case Func::Max: {
      // min = (f+g-|f-g|)/2, max = (f+g+|f-g|)/2; ties average per sgn(0)=0
      const NodePtr& f = n->a;
      const NodePtr& h = n->b;
      NodePtr df = diff_node(f, v);
      NodePtr dh = diff_node(h, v);
      NodePtr s = call1(Func::Sgn, sub(f, h));
      NodePtr asym = mul(s, sub(df, dh));
      NodePtr core = n->func == Func::Min ? sub(add(df, dh), asym) : add(add(df, dh), asym);
      return div(core, num(2.0));
    }
  }
  return num(0.0);
}

NodePtr diff_node(const NodePtr& n, Var v) {
  switch (n->kind) {
    case Node::Kind::Number:
    case Node::Kind::Pi:
      return num(0.0);
    case Node::Kind::Variable:
      return num(n->var == v ? 1.0 : 0.0);
    case Node::Kind::Neg:
      return neg(diff_node(n->a, v));
    case Node::Kind::Binary: {
      const NodePtr& a = n->a;
      const NodePtr& b = n->b;
      switch (n->op) {
        case BinaryOp::Add:
          return add(diff_node(a, v), diff_node(b, v));
        case BinaryOp::Sub:
          return sub(diff_node(a, v), diff_node(b, v));
        case BinaryOp::Mul:
          return add(mul(diff_node(a, v), b), mul(a, diff_node(b, v)));
        case BinaryOp::Div:
          return div(sub(mul(diff_node(a, v), b), mul(a, diff_node(b, v))),
                     pow_(b, num(2.0)));
        case BinaryOp::Pow: {
          if (!constant_tree(*b))
            throw EvalError("differentiate: variable exponents are not supported");
          if (constant_tree(*a)) return num(0.0);
          // d(g^c) = c g^(c-1) g'
          NodePtr dg = diff_node(a, v);
          NodePtr cm1 = sub(b, num(1.0));
          return mul(mul(b, pow_(a, cm1)), dg);
        }
      }
      return num(0.0);
    }
    case Node::Kind::Call:
      return diff_call(n, v);
  }
  return num(0.0);
}

bool equal_node(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Node::Kind::Number:
      return a.number == b.number;
    case Node::Kind::Pi:
      return true;
    case Node::Kind::Variable:
      return a.var == b.var;
    case Node::Kind::Neg:
      return equal_node(*a.a, *b.a);
    case Node::Kind::Binary:
      return a.op == b.op && equal_node(*a.a, *b.a) && equal_node(*a.b, *b.b);
    case Node::Kind::Call:
      if (a.func != b.func) return false;
      if (!equal_node(*a.a, *b.a)) return false;
      if ((a.b == nullptr) != (b.b == nullptr)) return false;
      return !a.b || equal_node(*a.b, *b.b);
  }
  return false;
}

bool depends_on(const Node& n, Var v) {
  switch (n.kind) {
    case Node::Kind::Number:
    case Node::Kind::Pi:
      return false;
    case Node::Kind::Variable:
      return n.var == v;
    case Node::Kind::Neg:
      return depends_on(*n.a, v);
    case Node::Kind::Binary:
      return depends_on(*n.a, v) || depends_on(*n.b, v);
    case Node::Kind::Call:
      return depends_on(*n.a, v) || (n.b && depends_on(*n.b, v));
  }
  return false;
}

}  // namespace

double Expr::eval(const EvalPoint& p) const {
  if (!root_) throw EvalError("evaluating an empty expression");
  return eval_node(*root_, p);
}

std::string Expr::to_string() const {
  if (!root_) return "";
  std::string out;
  print_node(*root_, out);
  return out;
}

bool Expr::independent_of(Var v) const { return !root_ || !depends_on(*root_, v); }

Expr parse_expr(const std::string& text) {
  if (text.empty()) throw ParseError("empty expression", 0, "an expression");
  Parser p(text);
  return Expr(p.run());
}

Expr differentiate(const Expr& e, Var v) {
  if (!e.valid()) throw EvalError("differentiating an empty expression");
  return Expr(diff_node(e.root(), v));
}

Expr laplacian(const Expr& e) {
  Expr d11 = differentiate(differentiate(e, Var::X1), Var::X1);
  Expr d22 = differentiate(differentiate(e, Var::X2), Var::X2);
  return Expr(add(d11.root(), d22.root()));
}

double eval_field(const Expr& e, const EvalPoint& p) { return e.eval(p); }

bool structurally_equal(const Expr& lhs, const Expr& rhs) {
  if (!lhs.valid() || !rhs.valid()) return lhs.valid() == rhs.valid();
  return equal_node(*lhs.root(), *rhs.root());
}

DiffExpr DiffExpr::build(const Expr& e) {
  DiffExpr d;
  d.value = e;
  d.dx1 = differentiate(e, Var::X1);
  d.dx2 = differentiate(e, Var::X2);
  d.lap = Expr(add(differentiate(d.dx1, Var::X1).root(), differentiate(d.dx2, Var::X2).root()));
  return d;
}

}  // namespace kinkopt::expr
