#include "doctest.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stefan/media.hpp"

using namespace stefan;

TEST_CASE("preset list and construction") {
  auto names = media_preset_names();
  for (const char* want : {"constant_identity", "constant_aniso", "layered", "cross_mild"})
    CHECK(std::find(names.begin(), names.end(), want) != names.end());
  for (const std::string& name : names) {
    CoefficientField f = make_media_preset(name, 3);
    CAPTURE(name);
    CHECK(f.dim == 3);
    CHECK(f.alpha > 0);
    CHECK(f.beta >= f.alpha);
    CHECK(f.g_lower > 0);
    MediaValidation v = validate_media(f, 1024);
    CHECK(v.pass);
  }
  CHECK_THROWS_AS(make_media_preset("no_such_medium", 3), std::invalid_argument);
}

TEST_CASE("constant identity evaluates to the identity") {
  CoefficientField f = make_media_preset("constant_identity", 3);
  CHECK(f.constant_in_space);
  CHECK(f.offdiag_pairs.empty());
  double x[3] = {0.3, -0.8, 2.4};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(f.entry(i, j, x) == doctest::Approx(i == j ? 1.0 : 0.0));
  CHECK(f.g(x) == doctest::Approx(1.0));
  REQUIRE(f.known.has_value());
  CHECK((f.known->q - Eigen::MatrixXd::Identity(3, 3)).norm() == doctest::Approx(0.0));
}

TEST_CASE("layered preset carries its closed-form reference") {
  CoefficientField f = make_media_preset("layered", 3);
  CHECK_FALSE(f.constant_in_space);
  REQUIRE(f.known.has_value());
  // Harmonic mean sqrt(3) across the layers, arithmetic mean 2 along them.
  CHECK(f.known->q(0, 0) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  CHECK(f.known->q(1, 1) == doctest::Approx(2.0));
  CHECK(f.known->q(2, 2) == doctest::Approx(2.0));
  CHECK(f.known->l_avg == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
  // 1-periodicity of the entries in the layering direction.
  double a[3] = {0.2, 0.5, 0.5}, b[3] = {1.2, 0.5, 0.5};
  CHECK(f.entry(0, 0, a) == doctest::Approx(f.entry(0, 0, b)));
  CHECK(f.g(a) == doctest::Approx(f.g(b)));
}

TEST_CASE("cross_mild has off-diagonal structure and stays elliptic") {
  CoefficientField f = make_media_preset("cross_mild", 3);
  CHECK_FALSE(f.offdiag_pairs.empty());
  MediaValidation v = validate_media(f, 4096);
  CHECK(v.pass);
  CHECK(v.rayleigh_min >= f.alpha - 1e-12);
  CHECK(v.rayleigh_max <= f.beta + 1e-12);
  // Spot symmetry.
  double x[3] = {0.37, 0.61, 0.93};
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) CHECK(f.entry(i, j, x) == doctest::Approx(f.entry(j, i, x)));
}

TEST_CASE("constant media from an explicit matrix") {
  Eigen::MatrixXd a0(3, 3);
  a0 << 2.0, 0.3, 0.0, 0.3, 1.5, -0.2, 0.0, -0.2, 1.0;
  CoefficientField f = make_constant_media(a0, 2.5);
  CHECK(f.constant_in_space);
  double x[3] = {9.0, -4.0, 0.1};
  CHECK((f.matrix_at(x) - a0).norm() == doctest::Approx(0.0));
  CHECK(f.g(x) == doctest::Approx(2.5));
  CHECK(f.offdiag_pairs.size() == 2);  // (0,1) and (1,2)
  REQUIRE(f.known.has_value());
  CHECK((f.known->q - a0).norm() == doctest::Approx(0.0));
  CHECK(f.known->l_avg == doctest::Approx(0.4));
  MediaValidation v = validate_media(f, 512);
  CHECK(v.pass);
}

TEST_CASE("expression media") {
  std::vector<std::vector<std::string>> entries = {
      {"2 + sin(2*pi*x1)", "0", "0"}, {"1.5", "0.25*cos(2*pi*x3)"}, {"1"}};
  CoefficientField f = make_expression_media(3, entries, "1 + 0.5*sin(2*pi*x2)^2");
  CHECK_FALSE(f.constant_in_space);
  CHECK(f.offdiag_pairs.size() == 1);
  CHECK(f.offdiag_pairs[0].first == 1);
  CHECK(f.offdiag_pairs[0].second == 2);
  MediaValidation v = validate_media(f, 4096);
  CHECK(v.pass);
  double x[3] = {0.25, 0.0, 0.5};
  CHECK(f.entry(0, 0, x) == doctest::Approx(3.0));
  CHECK(f.entry(1, 2, x) == doctest::Approx(0.25 * std::cos(3.14159265358979323846)));
  CHECK(f.entry(2, 1, x) == doctest::Approx(f.entry(1, 2, x)));

  // A 4-coordinate expression cannot drive a 3-d medium.
  CHECK_THROWS(make_expression_media(3, {{"1 + 0*x4", "0", "0"}, {"1", "0"}, {"1"}}, "1"));
  // Wrong triangle shape.
  CHECK_THROWS(make_expression_media(3, {{"1", "0"}, {"1", "0"}, {"1"}}, "1"));
}

TEST_CASE("validation flags an asymmetric or degenerate field") {
  CoefficientField f = make_media_preset("constant_identity", 3);
  f.entry = [](int i, int j, const double*) {
    if (i == 0 && j == 1) return 0.5;
    return i == j ? 1.0 : 0.0;
  };
  MediaValidation v = validate_media(f, 256);
  CHECK_FALSE(v.pass);
  CHECK(v.max_symmetry_residual > 0.1);

  CoefficientField g = make_media_preset("constant_identity", 3);
  g.g = [](const double*) { return -1.0; };
  MediaValidation vg = validate_media(g, 256);
  CHECK_FALSE(vg.pass);
}
