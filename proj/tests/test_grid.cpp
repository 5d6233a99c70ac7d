#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

#include "stefan/grid.hpp"
#include "stefan/media.hpp"
#include "stefan/pcg.hpp"

using namespace stefan;

namespace {

// Fill every cell from a callable of the center coordinates.
template <typename F>
Field field_of(const Grid& g, F f) {
  Field u = g.make_field();
  std::vector<int> idx(static_cast<size_t>(g.dim));
  std::vector<double> x(static_cast<size_t>(g.dim));
  for (std::int64_t c = 0; c < g.ncells; ++c) {
    g.decode(c, idx.data());
    g.center(idx.data(), x.data());
    u[static_cast<size_t>(c)] = f(x.data());
  }
  return u;
}

// Max of |apply_neg(u) - want| over cells off the outer layer.
double interior_row_error(const StencilOperator& op, const Field& u,
                          const std::function<double(const double*)>& want) {
  const Grid& g = op.grid();
  Field lu;
  op.apply_neg(u, lu);
  std::vector<int> idx(static_cast<size_t>(g.dim));
  std::vector<double> x(static_cast<size_t>(g.dim));
  double worst = 0.0;
  for (std::int64_t c = 0; c < g.ncells; ++c) {
    g.decode(c, idx.data());
    if (g.on_outer_layer(idx.data())) continue;
    g.center(idx.data(), x.data());
    worst = std::max(worst, std::fabs(lu[static_cast<size_t>(c)] - want(x.data())));
  }
  return worst;
}

}  // namespace

TEST_CASE("grid construction picks an odd exact-division resolution") {
  Grid g = Grid::make(3, 3.0, 1.0 / 16.0);
  CHECK(g.cells_per_axis == 97);
  CHECK(g.h == doctest::Approx(1.0 / 16.0).epsilon(1e-15));
  CHECK(g.ncells == 97ll * 97 * 97);
  CHECK(g.coord((g.cells_per_axis - 1) / 2) == doctest::Approx(0.0));
  CHECK(g.coord(0) == doctest::Approx(-3.0));
  CHECK(g.coord(96) == doctest::Approx(3.0));

  // h_target that does not divide r_box: settle on the next finer exact divisor.
  Grid c = Grid::make(3, 1.0, 0.3);
  CHECK(c.h == doctest::Approx(0.25));
  CHECK(c.cells_per_axis == 9);

  Grid q = Grid::make(4, 1.0, 0.5);
  CHECK(q.dim == 4);
  CHECK(q.ncells == 5ll * 5 * 5 * 5);
}

TEST_CASE("encode and decode are inverse") {
  Grid g = Grid::make(3, 1.0, 0.25);
  std::vector<int> idx(3), back(3);
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> pick(0, g.cells_per_axis - 1);
  for (int trial = 0; trial < 200; ++trial) {
    for (int d = 0; d < 3; ++d) idx[static_cast<size_t>(d)] = pick(gen);
    std::int64_t c = g.encode(idx.data());
    REQUIRE(c >= 0);
    REQUIRE(c < g.ncells);
    g.decode(c, back.data());
    CHECK(back == idx);
  }
}

TEST_CASE("masks split the box into source, outer layer, and free cells") {
  Grid g = Grid::make(3, 1.0, 0.25);  // 9^3
  DomainMasks m = build_masks(g, 0.3);
  CHECK(m.n_outer == 9 * 9 * 9 - 7 * 7 * 7);
  // Centers within radius 0.3 of the origin: the origin plus its six axis
  // neighbors at distance 0.25.
  CHECK(m.n_source == 7);
  CHECK(m.n_free == g.ncells - m.n_outer - m.n_source);
  CHECK(m.kind.size() == static_cast<size_t>(g.ncells));

  DomainMasks none = build_masks(g, 0.0);
  CHECK(none.n_source == 0);
}

TEST_CASE("operator matches the Laplacian for the identity medium") {
  Grid g = Grid::make(3, 1.0, 0.25);
  CoefficientField id = make_media_preset("constant_identity", 3);
  StencilOperator op(g, id);
  CHECK_FALSE(op.has_cross_terms());

  Field u = field_of(g, [](const double* x) { return x[0] * x[0]; });
  double err = interior_row_error(op, u, [](const double*) { return -2.0; });
  CHECK(err <= 1e-11);

  // Constant shift changes nothing when the medium is constant.
  StencilOperator shifted(g, id, 7.0);
  Field a, b;
  op.apply_neg(u, a);
  shifted.apply_neg(u, b);
  CHECK(linf_diff(a, b) == 0.0);
}

TEST_CASE("quadratics are differentiated exactly for constant matrices with cross terms") {
  Eigen::MatrixXd a0(3, 3);
  a0 << 2.0, 0.3, -0.1, 0.3, 1.5, 0.2, -0.1, 0.2, 1.0;
  CoefficientField media = make_constant_media(a0);
  Grid g = Grid::make(3, 1.0, 0.125);
  StencilOperator op(g, media);
  CHECK(op.has_cross_terms());

  // u = x_i x_j ->  L u = 2 a_ij.
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      Field u = field_of(g, [i, j](const double* x) { return x[i] * x[j]; });
      const double want = (i == j) ? -2.0 * a0(i, i) : -2.0 * a0(i, j);
      CAPTURE(i);
      CAPTURE(j);
      CHECK(interior_row_error(op, u, [want](const double*) { return want; }) <= 1e-10);
    }

  // u = x' A^{-1} x / 2  ->  L u = trace(A A^{-1}) = 3.
  Eigen::MatrixXd inv = a0.inverse();
  Field u = field_of(g, [&inv](const double* x) {
    Eigen::Vector3d v(x[0], x[1], x[2]);
    return 0.5 * v.dot(inv * v);
  });
  CHECK(interior_row_error(op, u, [](const double*) { return -3.0; }) <= 1e-10);
}

TEST_CASE("face sampling honors the rescaling shift") {
  Grid g = Grid::make(3, 1.0, 0.5);  // 5^3, cell centers at multiples of 0.5
  CoefficientField media = make_media_preset("layered", 3);
  Field u = field_of(g, [](const double* x) { return x[0]; });

  for (double s : {1.0, 3.0}) {
    StencilOperator op(g, media, s);
    // L u = d/dx0 a00, discretely (a+ - a-)/h with faces at +-h/2 scaled by s.
    auto a00 = [&](double x0) { return 2.0 + std::sin(2.0 * M_PI * s * x0); };
    int idx[3] = {2, 2, 2};
    const double ap = a00(0.25), am = a00(-0.25);
    const double want = -(ap - am) / g.h;
    CHECK(op.apply_neg_row(u, g.encode(idx)) == doctest::Approx(want).epsilon(1e-12));
    CHECK(op.shift() == s);
  }
}

TEST_CASE("the induced bilinear form is symmetric") {
  Grid g = Grid::make(3, 1.0, 1.0 / 6.0);  // 13^3
  CoefficientField media = make_media_preset("cross_mild", 3);
  StencilOperator op(g, media, 2.0);
  REQUIRE(op.has_cross_terms());

  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Field u = g.make_field(), w = g.make_field();
  std::vector<int> idx(3);
  for (std::int64_t c = 0; c < g.ncells; ++c) {
    g.decode(c, idx.data());
    if (g.on_outer_layer(idx.data())) continue;
    u[static_cast<size_t>(c)] = unit(gen);
    w[static_cast<size_t>(c)] = unit(gen);
  }
  Field lu, lw;
  op.apply_neg(u, lu);
  op.apply_neg(w, lw);
  double s1 = 0.0, s2 = 0.0, scale = 0.0;
  for (std::int64_t c = 0; c < g.ncells; ++c) {
    s1 += lu[static_cast<size_t>(c)] * w[static_cast<size_t>(c)];
    s2 += lw[static_cast<size_t>(c)] * u[static_cast<size_t>(c)];
    scale += std::fabs(lu[static_cast<size_t>(c)] * w[static_cast<size_t>(c)]);
  }
  CHECK(std::fabs(s1 - s2) <= 1e-11 * std::max(1.0, scale));
}

TEST_CASE("second-order consistency on quartics") {
  Eigen::MatrixXd a0(3, 3);
  a0 << 1.0, 0.25, 0.0, 0.25, 1.0, 0.0, 0.0, 0.0, 1.0;
  CoefficientField media = make_constant_media(a0);

  // u = x0^2 x1^2:  L u = 2 a00 x1^2 + 2 a11 x0^2 + 8 a01 x0 x1.
  auto exact = [&](const double* x) {
    return -(2.0 * a0(0, 0) * x[1] * x[1] + 2.0 * a0(1, 1) * x[0] * x[0] +
             8.0 * a0(0, 1) * x[0] * x[1]);
  };
  std::vector<double> errs;
  for (double h : {0.25, 0.125, 0.0625}) {
    Grid g = Grid::make(3, 1.0, h);
    StencilOperator op(g, media);
    Field u = field_of(g, [](const double* x) { return x[0] * x[0] * x[1] * x[1]; });
    errs.push_back(interior_row_error(op, u, exact));
  }
  for (size_t k = 0; k + 1 < errs.size(); ++k) {
    const double order = std::log2(errs[k] / errs[k + 1]);
    CAPTURE(k);
    CHECK(order >= 1.8);
  }
}

TEST_CASE("operator keeps its own copy of the grid") {
  CoefficientField id = make_media_preset("constant_identity", 3);
  StencilOperator op = [&id] {
    Grid g = Grid::make(3, 1.0, 0.5);
    return StencilOperator(g, id);
  }();
  CHECK(op.grid().cells_per_axis == 5);
  CHECK(op.grid().h == doctest::Approx(0.5));
}

TEST_CASE("multilinear interpolation reproduces affine fields and clamps outside") {
  Grid g = Grid::make(3, 1.0, 0.25);
  Field u = field_of(g, [](const double* x) { return 2.0 + 3.0 * x[0] - x[1] + 0.5 * x[2]; });
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> in(-0.99, 0.99);
  for (int trial = 0; trial < 100; ++trial) {
    double x[3] = {in(gen), in(gen), in(gen)};
    const double want = 2.0 + 3.0 * x[0] - x[1] + 0.5 * x[2];
    CHECK(interpolate(g, u, x) == doctest::Approx(want).epsilon(1e-12));
  }
  double far[3] = {5.0, 0.0, 0.0};
  double edge[3] = {1.0, 0.0, 0.0};
  CHECK(interpolate(g, u, far) == doctest::Approx(interpolate(g, u, edge)));
}

TEST_CASE("pcg recovers a manufactured solution through Dirichlet data") {
  Grid g = Grid::make(3, 1.0, 0.125);  // 17^3
  CoefficientField media = make_media_preset("cross_mild", 3);
  StencilOperator op(g, media);
  DomainMasks m = build_masks(g, 0.3);

  Field star = field_of(g, [](const double* x) {
    return std::sin(x[0] + 0.5 * x[1]) * std::cos(x[2]) + 0.25 * x[0] * x[0];
  });
  const double tau = 2.0;
  Field neg_l_star;
  op.apply_neg(star, neg_l_star);
  Field b = g.make_field();
  Field u = g.make_field();
  for (std::int64_t c = 0; c < g.ncells; ++c) {
    const size_t s = static_cast<size_t>(c);
    if (m.kind[s] == CellKind::kFree) {
      b[s] = tau * star[s] + neg_l_star[s];
    } else {
      u[s] = star[s];  // constrained cells carry the data
    }
  }
  PcgResult r = pcg_solve(op, m.kind, tau, b, u, 1e-12);
  CHECK(r.converged);
  CHECK(r.iterations > 0);
  CHECK(linf_diff(u, star) <= 1e-8);
}
