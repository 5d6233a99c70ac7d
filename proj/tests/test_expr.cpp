#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "stefan/expr.hpp"

using stefan::Expr;

TEST_CASE("arithmetic and precedence") {
  double x[3] = {2.0, 3.0, -1.0};
  CHECK(Expr::parse("1 + 2*x1^2").eval(x, 3) == doctest::Approx(9.0));
  CHECK(Expr::parse("x1*x2 - x3").eval(x, 3) == doctest::Approx(7.0));
  CHECK(Expr::parse("(1 + x1)^2").eval(x, 3) == doctest::Approx(9.0));
  CHECK(Expr::parse("8 / 2 / 2").eval(x, 3) == doctest::Approx(2.0));  // left assoc
  CHECK(Expr::parse("2^x2").eval(x, 3) == doctest::Approx(8.0));
  CHECK(Expr::parse("-x1^2").eval(x, 3) == doctest::Approx(-4.0));  // unary binds outside ^
  CHECK(Expr::parse("2^-1").eval(x, 3) == doctest::Approx(0.5));
}

TEST_CASE("coordinates and aliases") {
  double x[3] = {0.25, 0.5, 0.75};
  CHECK(Expr::parse("x").eval(x, 3) == doctest::Approx(0.25));
  CHECK(Expr::parse("y").eval(x, 3) == doctest::Approx(0.5));
  CHECK(Expr::parse("z").eval(x, 3) == doctest::Approx(0.75));
  CHECK(Expr::parse("x1 + 10*x2 + 100*x3").eval(x, 3) == doctest::Approx(80.25));
  CHECK(Expr::parse("x2").max_axis() == 1);
  CHECK(Expr::parse("x3 + x1").max_axis() == 2);
  CHECK(Expr::parse("1 + pi").max_axis() == -1);
}

TEST_CASE("functions") {
  double x[1] = {0.5};
  CHECK(Expr::parse("sin(pi*x1)").eval(x, 1) == doctest::Approx(1.0));
  CHECK(Expr::parse("cos(0)").eval(x, 1) == doctest::Approx(1.0));
  CHECK(Expr::parse("exp(log(4))").eval(x, 1) == doctest::Approx(4.0));
  CHECK(Expr::parse("sqrt(x1 + 3.5)").eval(x, 1) == doctest::Approx(2.0));
  CHECK(Expr::parse("abs(-3)").eval(x, 1) == doctest::Approx(3.0));
  CHECK(Expr::parse("tanh(1000)").eval(x, 1) == doctest::Approx(1.0));
  CHECK(Expr::parse("tan(0.3)").eval(x, 1) == doctest::Approx(std::tan(0.3)));
}

TEST_CASE("periodic building block used by the media presets") {
  Expr e = Expr::parse("2 + sin(2*pi*x1)");
  for (double t : {0.1, 0.37, 0.9}) {
    double a[1] = {t}, b[1] = {t + 1.0};
    CHECK(e.eval(a, 1) == doctest::Approx(e.eval(b, 1)));
  }
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(Expr::parse("1 +"), std::invalid_argument);
  CHECK_THROWS_AS(Expr::parse("(1 + 2"), std::invalid_argument);
  CHECK_THROWS_AS(Expr::parse("bogus(1)"), std::invalid_argument);
  CHECK_THROWS_AS(Expr::parse(""), std::invalid_argument);
  CHECK_THROWS_AS(Expr::parse("1 2"), std::invalid_argument);
  CHECK_THROWS_AS(Expr::parse("x0"), std::invalid_argument);
  double x[2] = {1.0, 2.0};
  CHECK_THROWS_AS(Expr::parse("x3").eval(x, 2), std::out_of_range);
  CHECK(Expr().empty());
  CHECK_FALSE(Expr::parse("1").empty());
}
