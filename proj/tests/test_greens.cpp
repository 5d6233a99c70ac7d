#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>

#include "stefan/greens.hpp"
#include "stefan/media.hpp"

using namespace stefan;

namespace {
const double kPi = 3.14159265358979323846;
}

TEST_CASE("sphere areas match the closed forms") {
  CHECK(sphere_area(2) == doctest::Approx(2.0 * kPi).epsilon(1e-14));
  CHECK(sphere_area(3) == doctest::Approx(4.0 * kPi).epsilon(1e-14));
  CHECK(sphere_area(4) == doctest::Approx(2.0 * kPi * kPi).epsilon(1e-14));
}

TEST_CASE("explicit kernel reproduces 1/(4 pi r) for the identity") {
  ExplicitKernel k = ExplicitKernel::make(Eigen::MatrixXd::Identity(3, 3));
  CHECK(k.kappa == doctest::Approx(1.0 / (4.0 * kPi)).epsilon(1e-14));
  double x[3] = {0.3, -0.4, 1.2};
  double r = std::sqrt(0.09 + 0.16 + 1.44);
  CHECK(k.value(x) == doctest::Approx(1.0 / (4.0 * kPi * r)).epsilon(1e-12));
  // Gradient: -x / (4 pi r^3).
  double g[3];
  k.gradient(x, g);
  for (int d = 0; d < 3; ++d)
    CHECK(g[d] == doctest::Approx(-x[d] / (4.0 * kPi * r * r * r)).epsilon(1e-12));
}

TEST_CASE("explicit kernel handles anisotropic coefficients") {
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(3, 3);
  q(0, 0) = 4.0;
  ExplicitKernel k = ExplicitKernel::make(q);
  // Along the stiff axis: (x' Q^-1 x)^(-1/2) / sqrt(det) = 2 / 2 = 1 at |x|=1.
  double e0[3] = {1.0, 0.0, 0.0};
  CHECK(k.value(e0) == doctest::Approx(1.0 / (4.0 * kPi)).epsilon(1e-12));
  // Across: (1)^(-1/2) / 2.
  double e1[3] = {0.0, 1.0, 0.0};
  CHECK(k.value(e1) == doctest::Approx(0.5 / (4.0 * kPi)).epsilon(1e-12));
  // The gradient is -kappa (x'Q^-1x)^(-n/2) Q^-1 x / sqrt det; spot check by
  // central differences.
  double x[3] = {0.7, -0.2, 0.5};
  double g[3];
  k.gradient(x, g);
  for (int d = 0; d < 3; ++d) {
    double xp[3] = {x[0], x[1], x[2]}, xm[3] = {x[0], x[1], x[2]};
    xp[d] += 1e-6;
    xm[d] -= 1e-6;
    CHECK(g[d] == doctest::Approx((k.value(xp) - k.value(xm)) / 2e-6).epsilon(1e-7));
  }

  CHECK_THROWS(ExplicitKernel::make(Eigen::MatrixXd::Zero(3, 3)));
}

TEST_CASE("weak delta quadrature recovers unit mass") {
  ExplicitKernel k = ExplicitKernel::make(Eigen::MatrixXd::Identity(3, 3));
  double i32 = std::fabs(delta_test(k, 2.0, 1.0 / 32.0) - 1.0);
  double i16 = std::fabs(delta_test(k, 2.0, 1.0 / 16.0) - 1.0);
  CHECK(i32 <= 5e-3);
  CHECK(i32 < 0.5 * i16);

  Eigen::MatrixXd q(3, 3);
  q << 2.0, 0.3, 0.0, 0.3, 1.5, -0.2, 0.0, -0.2, 1.0;
  ExplicitKernel ka = ExplicitKernel::make(q);
  // The anisotropic quadrature converges at second order; check the value and
  // the trend.
  double e32 = std::fabs(delta_test(ka, 2.0, 1.0 / 32.0) - 1.0);
  double e16 = std::fabs(delta_test(ka, 2.0, 1.0 / 16.0) - 1.0);
  CHECK(e32 <= 5e-3);
  CHECK(e32 < 0.5 * e16);
}

TEST_CASE("numeric kernel for constant media matches the explicit one") {
  CoefficientField media = make_constant_media(Eigen::MatrixXd::Identity(3, 3));
  GreensTable tab = solve_greens_numeric(media, 2.0, 1.0 / 16.0, 1.0, FarField::kExactKernel);
  CHECK(tab.solve_info.converged);
  ExplicitKernel k = ExplicitKernel::make(Eigen::MatrixXd::Identity(3, 3));
  // Away from the origin cell and the box the discrete kernel tracks 1/(4 pi r).
  CHECK(annulus_max_rel_err(tab, k, 0.4, 1.6) <= 0.05);
}

TEST_CASE("kernel bounds bracket the identity constants") {
  CoefficientField media = make_constant_media(Eigen::MatrixXd::Identity(3, 3));
  GreensTable tab = solve_greens_numeric(media, 2.0, 1.0 / 16.0, 1.0, FarField::kExactKernel);
  KernelBounds kb = kernel_bounds(tab, 0.4, 1.6);
  REQUIRE(kb.positive);
  CHECK(kb.ncells > 1000);
  const double c = 1.0 / (4.0 * kPi);
  CHECK(kb.c_lower <= kb.c_upper);
  CHECK(kb.c_lower == doctest::Approx(c).epsilon(0.06));
  CHECK(kb.c_upper == doctest::Approx(c).epsilon(0.06));
  // |DG| |x|^2 is also 1/(4 pi) for the radial kernel.
  CHECK(kb.m_gradient_low <= kb.m_gradient);
  CHECK(kb.m_gradient == doctest::Approx(c).epsilon(0.08));
  CHECK(kb.m_gradient_low == doctest::Approx(c).epsilon(0.08));
  CHECK(kb.c_bound >= kb.c_upper);

  // Degenerate annulus past the box corners: refused outright.
  CHECK_THROWS(kernel_bounds(tab, 3.6, 3.8));
}

TEST_CASE("rescaled resampling is an identity for constant media") {
  // For constant coefficients G^lambda(x) = lambda^((n-2)/n) G(lambda^(1/n) x)
  // equals G(x) in the continuum, so the resampled table must agree with the
  // original on the target grid.
  CoefficientField media = make_constant_media(Eigen::MatrixXd::Identity(3, 3));
  GreensTable base = solve_greens_numeric(media, 2.0, 1.0 / 16.0, 1.0, FarField::kExactKernel);
  Grid target = Grid::make(3, 0.75, 1.0 / 16.0);
  Field res = resample_rescaled(base, target, 8.0);
  ExplicitKernel k = ExplicitKernel::make(Eigen::MatrixXd::Identity(3, 3));
  int idx[3];
  double x[3];
  double worst = 0.0;
  for (std::int64_t c = 0; c < target.ncells; ++c) {
    target.decode(c, idx);
    target.center(idx, x);
    double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    if (r < 0.3 || r > 0.7) continue;
    worst = std::max(worst, std::fabs(res[static_cast<size_t>(c)] / k.value(x) - 1.0));
  }
  CHECK(worst <= 0.08);
}

TEST_CASE("reference kernel equals the numeric solve for constant media") {
  Eigen::MatrixXd q(3, 3);
  q << 2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0;
  CoefficientField media = make_constant_media(q);
  GreensTable a = solve_greens_numeric(media, 1.5, 1.0 / 8.0, 1.0, FarField::kHomogenizedLift, &q);
  GreensTable b = solve_reference_kernel(q, a.grid, FarField::kHomogenizedLift);
  // Same grid, same operator, same far field: the tables agree to solver
  // tolerance.
  CHECK(annulus_sup_diff(a.grid, a.values, b.values, 0.0, 2.0) <= 1e-7);
}

TEST_CASE("annulus sup diff sees only the annulus") {
  Grid g = Grid::make(3, 1.0, 1.0 / 8.0);
  Field a = g.make_field(), b = g.make_field();
  int idx[3];
  double x[3];
  for (std::int64_t c = 0; c < g.ncells; ++c) {
    g.decode(c, idx);
    g.center(idx, x);
    double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    b[static_cast<size_t>(c)] = r < 0.5 ? 3.0 : 0.25;
  }
  CHECK(annulus_sup_diff(g, a, b, 0.6, 0.9) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(annulus_sup_diff(g, a, b, 0.0, 0.4) == doctest::Approx(3.0).epsilon(1e-12));
}
