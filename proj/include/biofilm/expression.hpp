#pragma once

#include <memory>
#include <string>

namespace biofilm {

/// Tiny arithmetic expressions over the variables x1, x2 and t, with the
/// operations + - * /, the functions sin/cos/exp, numeric literals and pi.
/// Expressions differentiate symbolically, so boundary and motion data
/// supplied as text have exact derivatives (no input differencing anywhere).
class Expr {
 public:
  Expr();  // constant 0

  static Expr parse(const std::string& text);
  static Expr constant(double value);

  double eval(double x1, double x2, double t) const;
  double operator()(double x1, double x2, double t) const { return eval(x1, x2, t); }

  /// Symbolic partial derivative with respect to "x1", "x2" or "t".
  Expr derivative(const std::string& var) const;

  /// True (and fills *value) when the expression folds to a constant.
  bool is_constant(double* value = nullptr) const;

  /// Canonical text form; parse(str()) evaluates identically.
  std::string str() const;

  struct Node;

 private:
  explicit Expr(std::shared_ptr<const Node> root);
  std::shared_ptr<const Node> root_;
};

}  // namespace biofilm
