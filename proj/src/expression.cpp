#include "biofilm/expression.hpp"

#include "biofilm/types.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace biofilm {

namespace {
enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Sin, Cos, Exp };
}

struct Expr::Node {
  Op op = Op::Const;
  double value = 0.0;  // Const
  int var = 0;         // Var: 0=x1, 1=x2, 2=t
  std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr make_const(double v) {
  auto n = std::make_shared<Expr::Node>();
  n->op = Op::Const;
  n->value = v;
  return n;
}

NodePtr make_var(int var) {
  auto n = std::make_shared<Expr::Node>();
  n->op = Op::Var;
  n->var = var;
  return n;
}

NodePtr make_node(Op op, NodePtr lhs, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Expr::Node>();
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

bool const_value(const NodePtr& n, double* v) {
  if (n->op != Op::Const) return false;
  if (v) *v = n->value;
  return true;
}

// Builders with constant folding and 0/1 elimination.
NodePtr add(NodePtr a, NodePtr b) {
  double va, vb;
  if (const_value(a, &va) && const_value(b, &vb)) return make_const(va + vb);
  if (const_value(a, &va) && va == 0.0) return b;
  if (const_value(b, &vb) && vb == 0.0) return a;
  return make_node(Op::Add, std::move(a), std::move(b));
}

NodePtr sub(NodePtr a, NodePtr b) {
  double va, vb;
  if (const_value(a, &va) && const_value(b, &vb)) return make_const(va - vb);
  if (const_value(b, &vb) && vb == 0.0) return a;
  if (const_value(a, &va) && va == 0.0) return make_node(Op::Neg, std::move(b));
  return make_node(Op::Sub, std::move(a), std::move(b));
}

NodePtr mul(NodePtr a, NodePtr b) {
  double va, vb;
  if (const_value(a, &va) && const_value(b, &vb)) return make_const(va * vb);
  if (const_value(a, &va)) {
    if (va == 0.0) return make_const(0.0);
    if (va == 1.0) return b;
  }
  if (const_value(b, &vb)) {
    if (vb == 0.0) return make_const(0.0);
    if (vb == 1.0) return a;
  }
  return make_node(Op::Mul, std::move(a), std::move(b));
}

NodePtr div(NodePtr a, NodePtr b) {
  double va, vb;
  if (const_value(b, &vb) && vb == 0.0)
    throw InvalidInput("expression: division by constant zero");
  if (const_value(a, &va) && const_value(b, &vb)) return make_const(va / vb);
  if (const_value(a, &va) && va == 0.0) return make_const(0.0);
  if (const_value(b, &vb) && vb == 1.0) return a;
  return make_node(Op::Div, std::move(a), std::move(b));
}

NodePtr neg(NodePtr a) {
  double va;
  if (const_value(a, &va)) return make_const(-va);
  return make_node(Op::Neg, std::move(a));
}

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  NodePtr run() {
    auto n = parse_expr();
    skip_ws();
    if (pos_ != text_.size())
      fail("unexpected trailing input");
    return n;
  }

 private:
  const std::string& text_;
  size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) {
    std::ostringstream os;
    os << "expression: " << what << " at position " << pos_ << " in '" << text_ << "'";
    throw InvalidInput(os.str());
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  NodePtr parse_expr() {
    auto n = parse_term();
    for (;;) {
      if (consume('+'))
        n = add(n, parse_term());
      else if (consume('-'))
        n = sub(n, parse_term());
      else
        return n;
    }
  }

  NodePtr parse_term() {
    auto n = parse_factor();
    for (;;) {
      if (consume('*'))
        n = mul(n, parse_factor());
      else if (consume('/'))
        n = div(n, parse_factor());
      else
        return n;
    }
  }

  NodePtr parse_factor() {
    if (consume('-')) return neg(parse_factor());
    if (consume('+')) return parse_factor();
    return parse_primary();
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto n = parse_expr();
      if (!consume(')')) fail("missing ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
    fail("unexpected character");
  }

  NodePtr parse_number() {
    size_t end = pos_;
    while (end < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
            text_[end] == 'e' || text_[end] == 'E' ||
            ((text_[end] == '+' || text_[end] == '-') && end > pos_ &&
             (text_[end - 1] == 'e' || text_[end - 1] == 'E'))))
      ++end;
    double v;
    try {
      v = std::stod(text_.substr(pos_, end - pos_));
    } catch (const std::exception&) {
      fail("malformed number");
    }
    pos_ = end;
    return make_const(v);
  }

  NodePtr parse_ident() {
    size_t end = pos_;
    while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_'))
      ++end;
    std::string name = text_.substr(pos_, end - pos_);
    pos_ = end;
    if (name == "x1") return make_var(0);
    if (name == "x2") return make_var(1);
    if (name == "t") return make_var(2);
    if (name == "pi") return make_const(M_PI);
    if (name == "sin" || name == "cos" || name == "exp") {
      if (!consume('(')) fail("expected '(' after function name");
      auto arg = parse_expr();
      if (!consume(')')) fail("missing ')'");
      Op op = name == "sin" ? Op::Sin : name == "cos" ? Op::Cos : Op::Exp;
      double va;
      if (const_value(arg, &va)) {
        double r = op == Op::Sin ? std::sin(va) : op == Op::Cos ? std::cos(va) : std::exp(va);
        return make_const(r);
      }
      return make_node(op, std::move(arg));
    }
    fail("unknown identifier '" + name + "'");
  }
};

double eval_node(const Expr::Node& n, double x1, double x2, double t) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::Var: return n.var == 0 ? x1 : n.var == 1 ? x2 : t;
    case Op::Add: return eval_node(*n.lhs, x1, x2, t) + eval_node(*n.rhs, x1, x2, t);
    case Op::Sub: return eval_node(*n.lhs, x1, x2, t) - eval_node(*n.rhs, x1, x2, t);
    case Op::Mul: return eval_node(*n.lhs, x1, x2, t) * eval_node(*n.rhs, x1, x2, t);
    case Op::Div: return eval_node(*n.lhs, x1, x2, t) / eval_node(*n.rhs, x1, x2, t);
    case Op::Neg: return -eval_node(*n.lhs, x1, x2, t);
    case Op::Sin: return std::sin(eval_node(*n.lhs, x1, x2, t));
    case Op::Cos: return std::cos(eval_node(*n.lhs, x1, x2, t));
    case Op::Exp: return std::exp(eval_node(*n.lhs, x1, x2, t));
  }
  return 0.0;
}

NodePtr diff_node(const NodePtr& n, int var) {
  switch (n->op) {
    case Op::Const: return make_const(0.0);
    case Op::Var: return make_const(n->var == var ? 1.0 : 0.0);
    case Op::Add: return add(diff_node(n->lhs, var), diff_node(n->rhs, var));
    case Op::Sub: return sub(diff_node(n->lhs, var), diff_node(n->rhs, var));
    case Op::Mul:
      return add(mul(diff_node(n->lhs, var), n->rhs), mul(n->lhs, diff_node(n->rhs, var)));
    case Op::Div:
      return div(sub(mul(diff_node(n->lhs, var), n->rhs), mul(n->lhs, diff_node(n->rhs, var))),
                 mul(n->rhs, n->rhs));
    case Op::Neg: return neg(diff_node(n->lhs, var));
    case Op::Sin: return mul(make_node(Op::Cos, n->lhs), diff_node(n->lhs, var));
    case Op::Cos: return neg(mul(make_node(Op::Sin, n->lhs), diff_node(n->lhs, var)));
    case Op::Exp: return mul(make_node(Op::Exp, n->lhs), diff_node(n->lhs, var));
  }
  return make_const(0.0);
}

void print_node(const Expr::Node& n, std::ostream& os) {
  switch (n.op) {
    case Op::Const: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      os << buf;
      return;
    }
    case Op::Var: os << (n.var == 0 ? "x1" : n.var == 1 ? "x2" : "t"); return;
    case Op::Add: case Op::Sub: case Op::Mul: case Op::Div: {
      const char* sym = n.op == Op::Add ? "+" : n.op == Op::Sub ? "-" : n.op == Op::Mul ? "*" : "/";
      os << '(';
      print_node(*n.lhs, os);
      os << sym;
      print_node(*n.rhs, os);
      os << ')';
      return;
    }
    case Op::Neg:
      os << "(-";
      print_node(*n.lhs, os);
      os << ')';
      return;
    case Op::Sin: case Op::Cos: case Op::Exp:
      os << (n.op == Op::Sin ? "sin(" : n.op == Op::Cos ? "cos(" : "exp(");
      print_node(*n.lhs, os);
      os << ')';
      return;
  }
}

}  // namespace

Expr::Expr() : root_(make_const(0.0)) {}
Expr::Expr(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

Expr Expr::parse(const std::string& text) { return Expr(Parser(text).run()); }

Expr Expr::constant(double value) { return Expr(make_const(value)); }

double Expr::eval(double x1, double x2, double t) const { return eval_node(*root_, x1, x2, t); }

Expr Expr::derivative(const std::string& var) const {
  int v = var == "x1" ? 0 : var == "x2" ? 1 : var == "t" ? 2 : -1;
  if (v < 0) throw InvalidInput("expression: unknown differentiation variable '" + var + "'");
  return Expr(diff_node(root_, v));
}

bool Expr::is_constant(double* value) const {
  if (root_->op != Op::Const) return false;
  if (value) *value = root_->value;
  return true;
}

std::string Expr::str() const {
  std::ostringstream os;
  print_node(*root_, os);
  return os.str();
}

}  // namespace biofilm
