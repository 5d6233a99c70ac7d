#include "stefan/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace stefan {

class ExprParser {
public:
  ExprParser(const std::string& text, Expr& out) : text_(text), out_(out) {}

  void run() {
    out_.nodes_.clear();
    out_.text_ = text_;
    pos_ = 0;
    out_.root_ = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters");
  }

private:
  const std::string& text_;
  Expr& out_;
  size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) {
    throw std::invalid_argument("expression error at position " + std::to_string(pos_) +
                                " in \"" + text_ + "\": " + what);
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

  int add_node(Expr::Node n) {
    out_.nodes_.push_back(n);
    return static_cast<int>(out_.nodes_.size()) - 1;
  }

  int make_binary(Expr::Op op, int lhs, int rhs) {
    Expr::Node n;
    n.op = op;
    n.lhs = lhs;
    n.rhs = rhs;
    return add_node(n);
  }

  int parse_expr() {
    int lhs = parse_term();
    for (;;) {
      if (consume('+')) lhs = make_binary(Expr::Op::kAdd, lhs, parse_term());
      else if (consume('-')) lhs = make_binary(Expr::Op::kSub, lhs, parse_term());
      else return lhs;
    }
  }

  int parse_term() {
    int lhs = parse_unary();
    for (;;) {
      if (consume('*')) lhs = make_binary(Expr::Op::kMul, lhs, parse_unary());
      else if (consume('/')) lhs = make_binary(Expr::Op::kDiv, lhs, parse_unary());
      else return lhs;
    }
  }

  int parse_unary() {
    if (consume('-')) {
      Expr::Node n;
      n.op = Expr::Op::kNeg;
      n.lhs = parse_unary();
      return add_node(n);
    }
    if (consume('+')) return parse_unary();
    return parse_power();
  }

  int parse_power() {
    int base = parse_atom();
    if (consume('^')) return make_binary(Expr::Op::kPow, base, parse_unary());
    return base;
  }

  int parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    if (consume('(')) {
      int inner = parse_expr();
      if (!consume(')')) fail("expected ')'");
      return inner;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  int parse_number() {
    const char* start = text_.c_str() + pos_;
    char* end = nullptr;
    double v = std::strtod(start, &end);
    if (end == start) fail("bad number");
    pos_ += static_cast<size_t>(end - start);
    Expr::Node n;
    n.op = Expr::Op::kConst;
    n.value = v;
    return add_node(n);
  }

  int parse_ident() {
    size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string name = text_.substr(start, pos_ - start);

    if (name == "pi") {
      Expr::Node n;
      n.op = Expr::Op::kConst;
      n.value = 3.14159265358979323846;
      return add_node(n);
    }
    if (name == "x" || name == "y" || name == "z" ||
        (name.size() >= 2 && name[0] == 'x' && std::isdigit(static_cast<unsigned char>(name[1])))) {
      Expr::Node n;
      n.op = Expr::Op::kCoord;
      if (name == "x") n.axis = 0;
      else if (name == "y") n.axis = 1;
      else if (name == "z") n.axis = 2;
      else {
        n.axis = std::atoi(name.c_str() + 1) - 1;
        if (n.axis < 0) fail("bad coordinate " + name);
      }
      return add_node(n);
    }

    Expr::Op op;
    if (name == "sin") op = Expr::Op::kSin;
    else if (name == "cos") op = Expr::Op::kCos;
    else if (name == "tan") op = Expr::Op::kTan;
    else if (name == "exp") op = Expr::Op::kExp;
    else if (name == "log") op = Expr::Op::kLog;
    else if (name == "sqrt") op = Expr::Op::kSqrt;
    else if (name == "abs") op = Expr::Op::kAbs;
    else if (name == "tanh") op = Expr::Op::kTanh;
    else fail("unknown identifier " + name);

    if (!consume('(')) fail("expected '(' after " + name);
    int arg = parse_expr();
    if (!consume(')')) fail("expected ')'");
    Expr::Node n;
    n.op = op;
    n.lhs = arg;
    return add_node(n);
  }
};

Expr Expr::parse(const std::string& text) {
  Expr e;
  ExprParser p(text, e);
  p.run();
  return e;
}

double Expr::eval(const double* x, int dim) const {
  if (root_ < 0) throw std::logic_error("eval of empty expression");
  return eval_node(root_, x, dim);
}

double Expr::eval_node(int idx, const double* x, int dim) const {
  const Node& n = nodes_[static_cast<size_t>(idx)];
  switch (n.op) {
    case Op::kConst: return n.value;
    case Op::kCoord:
      if (n.axis >= dim)
        throw std::out_of_range("expression uses x" + std::to_string(n.axis + 1) +
                                " on a " + std::to_string(dim) + "-d point");
      return x[n.axis];
    case Op::kAdd: return eval_node(n.lhs, x, dim) + eval_node(n.rhs, x, dim);
    case Op::kSub: return eval_node(n.lhs, x, dim) - eval_node(n.rhs, x, dim);
    case Op::kMul: return eval_node(n.lhs, x, dim) * eval_node(n.rhs, x, dim);
    case Op::kDiv: return eval_node(n.lhs, x, dim) / eval_node(n.rhs, x, dim);
    case Op::kPow: return std::pow(eval_node(n.lhs, x, dim), eval_node(n.rhs, x, dim));
    case Op::kNeg: return -eval_node(n.lhs, x, dim);
    case Op::kSin: return std::sin(eval_node(n.lhs, x, dim));
    case Op::kCos: return std::cos(eval_node(n.lhs, x, dim));
    case Op::kTan: return std::tan(eval_node(n.lhs, x, dim));
    case Op::kExp: return std::exp(eval_node(n.lhs, x, dim));
    case Op::kLog: return std::log(eval_node(n.lhs, x, dim));
    case Op::kSqrt: return std::sqrt(eval_node(n.lhs, x, dim));
    case Op::kAbs: return std::fabs(eval_node(n.lhs, x, dim));
    case Op::kTanh: return std::tanh(eval_node(n.lhs, x, dim));
  }
  throw std::logic_error("unreachable");
}

int Expr::max_axis() const {
  int m = -1;
  for (const Node& n : nodes_)
    if (n.op == Op::kCoord && n.axis > m) m = n.axis;
  return m;
}

}  // namespace stefan
