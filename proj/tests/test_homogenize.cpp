#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>

#include "stefan/homogenize.hpp"
#include "stefan/media.hpp"

using namespace stefan;

TEST_CASE("constant media homogenize to themselves") {
  for (const char* name : {"constant_identity", "constant_aniso"}) {
    CAPTURE(name);
    CoefficientField f = make_media_preset(name, 3);
    CellProblemResult cp = solve_cell_problems(f, 8);
    REQUIRE(f.known.has_value());
    CHECK((cp.q - f.known->q).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::fabs(cp.l_avg - f.known->l_avg) <= 1e-12);
    CHECK(cp.asym_residual <= 1e-12);
    // Correctors of a constant medium vanish.
    for (const auto& chi : cp.correctors)
      for (double v : chi) CHECK(std::fabs(v) <= 1e-10);
  }
}

TEST_CASE("layered medium reproduces harmonic and arithmetic means") {
  CoefficientField f = make_media_preset("layered", 3);
  CellProblemResult cp = solve_cell_problems(f, 32);
  // Across the layers: harmonic mean of 2 + sin = sqrt(3). Along: mean 2.
  CHECK(std::fabs(cp.q(0, 0) - std::sqrt(3.0)) <= 1e-6);
  CHECK(std::fabs(cp.q(1, 1) - 2.0) <= 1e-6);
  CHECK(std::fabs(cp.q(2, 2) - 2.0) <= 1e-6);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) CHECK(std::fabs(cp.q(i, j)) <= 1e-8);
  CHECK(std::fabs(cp.l_avg - 1.0 / std::sqrt(3.0)) <= 1e-9);

  for (int it : cp.cg_iterations) CHECK(it >= 0);
  for (double r : cp.cg_residuals) CHECK(r <= 1e-9);
}

TEST_CASE("effective tensor sits between Reuss and Voigt bounds") {
  for (const char* name : {"layered", "cross_mild"}) {
    CAPTURE(name);
    CoefficientField f = make_media_preset(name, 3);
    CellProblemResult cp = solve_cell_problems(f, 16);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> lo(cp.q - cp.reuss);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> hi(cp.voigt - cp.q);
    const double floor = -1e-8 * cp.voigt.norm();
    CHECK(lo.eigenvalues().minCoeff() >= floor);
    CHECK(hi.eigenvalues().minCoeff() >= floor);
    // And the tensor itself is SPD and symmetric.
    CHECK((cp.q - cp.q.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cp.q);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("cell problem converges under refinement") {
  CoefficientField f = make_media_preset("cross_mild", 3);
  CellProblemResult coarse = solve_cell_problems(f, 8);
  CellProblemResult mid = solve_cell_problems(f, 16);
  CellProblemResult fine = solve_cell_problems(f, 32);
  const double d1 = (coarse.q - fine.q).cwiseAbs().maxCoeff();
  const double d2 = (mid.q - fine.q).cwiseAbs().maxCoeff();
  CHECK(d2 <= d1 + 1e-14);
  // The declared average of 1/g is exact for this preset.
  REQUIRE(f.known.has_value());
  CHECK(std::fabs(fine.l_avg - f.known->l_avg) <= 1e-9);
}

TEST_CASE("matrix square root squares back") {
  Eigen::MatrixXd q(3, 3);
  q << 3.0, 0.4, 0.1, 0.4, 2.0, -0.3, 0.1, -0.3, 1.5;
  Eigen::MatrixXd p = sqrt_spd(q);
  CHECK((p * p - q).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((p - p.transpose()).cwiseAbs().maxCoeff() <= 1e-12);

  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  CHECK_THROWS(sqrt_spd(bad));
}

TEST_CASE("averaging error decays with the period") {
  CoefficientField f = make_media_preset("layered", 3);
  auto rows = averaging_check(f, {1.0, 0.5, 0.25}, 48);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].eps == doctest::Approx(1.0));
  for (size_t k = 0; k + 1 < rows.size(); ++k) {
    CAPTURE(k);
    CHECK(rows[k + 1].error < rows[k].error);
  }
  CHECK(rows.back().error < 0.05);
}
