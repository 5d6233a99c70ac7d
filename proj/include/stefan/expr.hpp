#pragma once

#include <memory>
#include <string>
#include <vector>

namespace stefan {

// Scalar function of a point compiled from a small arithmetic expression.
// Grammar:
//   expr  := term (('+'|'-') term)*
//   term  := unary (('*'|'/') unary)*
//   unary := ('+'|'-') unary | power
//   power := atom ('^' unary)?
//   atom  := number | 'pi' | coordinate | function '(' expr ')' | '(' expr ')'
// Coordinates are x1, x2, ... (x, y, z accepted as aliases for x1, x2, x3).
// Functions: sin cos tan exp log sqrt abs tanh.
class Expr {
public:
  Expr() = default;

  static Expr parse(const std::string& text);

  double eval(const double* x, int dim) const;
  bool empty() const { return nodes_.empty(); }
  const std::string& text() const { return text_; }

  // Highest coordinate index used, so callers can reject 2-d expressions on 3-d grids.
  int max_axis() const;

private:
  enum class Op : unsigned char {
    kConst, kCoord, kAdd, kSub, kMul, kDiv, kPow, kNeg,
    kSin, kCos, kTan, kExp, kLog, kSqrt, kAbs, kTanh
  };
  struct Node {
    Op op;
    double value = 0.0;  // kConst
    int axis = -1;       // kCoord
    int lhs = -1;
    int rhs = -1;
  };
  std::vector<Node> nodes_;
  int root_ = -1;
  std::string text_;

  double eval_node(int idx, const double* x, int dim) const;
  friend class ExprParser;
};

}  // namespace stefan
