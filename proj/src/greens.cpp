#include "stefan/greens.hpp"

#include <cmath>
#include <stdexcept>

namespace stefan {

double sphere_area(int dim) {
  return 2.0 * std::pow(3.14159265358979323846, 0.5 * dim) / std::tgamma(0.5 * dim);
}

ExplicitKernel ExplicitKernel::make(const Eigen::MatrixXd& q) {
  ExplicitKernel k;
  k.dim = static_cast<int>(q.rows());
  if (k.dim < 3) throw std::invalid_argument("explicit kernel needs dimension >= 3");
  k.q = q;
  k.q_inv = q.inverse();
  const double det = q.determinant();
  if (det <= 0.0) throw std::invalid_argument("kernel tensor must be positive definite");
  k.sqrt_det = std::sqrt(det);
  k.kappa = 1.0 / ((k.dim - 2) * sphere_area(k.dim));
  return k;
}

double ExplicitKernel::value(const double* x) const {
  double quad = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) quad += x[i] * q_inv(i, j) * x[j];
  return kappa * std::pow(quad, 0.5 * (2 - dim)) / sqrt_det;
}

void ExplicitKernel::gradient(const double* x, double* g) const {
  double quad = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) quad += x[i] * q_inv(i, j) * x[j];
  const double scale = kappa * (2 - dim) * std::pow(quad, -0.5 * dim) / sqrt_det;
  for (int i = 0; i < dim; ++i) {
    double qi = 0.0;
    for (int j = 0; j < dim; ++j) qi += q_inv(i, j) * x[j];
    g[i] = scale * qi;
  }
}

namespace {

GreensTable solve_on_grid(const StencilOperator& op, const Grid& grid, double lambda,
                          FarField far_field, const ExplicitKernel* lift, double rtol,
                          int max_iter) {
  DomainMasks masks = build_masks(grid, 0.0);
  Field b = grid.make_field();
  Field u = grid.make_field();

  std::vector<int> origin(static_cast<size_t>(grid.dim), (grid.cells_per_axis - 1) / 2);
  const std::int64_t c0 = grid.encode(origin.data());
  b[static_cast<size_t>(c0)] = std::pow(grid.h, -grid.dim);

  if (far_field != FarField::kZero) {
    if (lift == nullptr) throw std::invalid_argument("far-field lift requires a kernel");
    std::vector<int> idx(static_cast<size_t>(grid.dim), 0);
    std::vector<double> x(static_cast<size_t>(grid.dim), 0.0);
    for (std::int64_t c = 0; c < grid.ncells; ++c) {
      if (masks.kind[static_cast<size_t>(c)] == CellKind::kOuter) {
        grid.center(idx.data(), x.data());
        u[static_cast<size_t>(c)] = lift->value(x.data());
      }
      for (int d = 0; d < grid.dim; ++d) {
        if (++idx[static_cast<size_t>(d)] < grid.cells_per_axis) break;
        idx[static_cast<size_t>(d)] = 0;
      }
    }
  }

  GreensTable table;
  table.grid = grid;
  table.lambda = lambda;
  table.solve_info = pcg_solve(op, masks.kind, 0.0, b, u, rtol, max_iter);
  if (!table.solve_info.converged)
    throw std::runtime_error("kernel solve did not converge: residual " +
                             std::to_string(table.solve_info.rel_residual));
  table.values = std::move(u);
  return table;
}

}  // namespace

GreensTable solve_greens_numeric(const CoefficientField& media, double r_box, double h_target,
                                 double lambda, FarField far_field,
                                 const Eigen::MatrixXd* q_lift, double rtol, int max_iter) {
  const int dim = media.dim;
  if (dim < 3) throw std::invalid_argument("kernel solves need dimension >= 3");
  Grid grid = Grid::make(dim, r_box, h_target);
  const double shift = std::pow(lambda, 1.0 / dim);
  StencilOperator op(grid, media, shift);

  std::optional<ExplicitKernel> lift;
  if (far_field == FarField::kHomogenizedLift) {
    if (q_lift == nullptr)
      throw std::invalid_argument("homogenized far field needs the effective tensor");
    lift = ExplicitKernel::make(*q_lift);
  } else if (far_field == FarField::kExactKernel) {
    if (!media.constant_in_space)
      throw std::invalid_argument("exact far field is only available for constant media");
    std::vector<double> zero(static_cast<size_t>(dim), 0.0);
    lift = ExplicitKernel::make(media.matrix_at(zero.data()));
  }
  return solve_on_grid(op, grid, lambda, far_field, lift ? &*lift : nullptr, rtol, max_iter);
}

GreensTable solve_reference_kernel(const Eigen::MatrixXd& q, const Grid& grid,
                                   FarField far_field, double rtol, int max_iter) {
  CoefficientField media = make_constant_media(q);
  StencilOperator op(grid, media, 1.0);
  std::optional<ExplicitKernel> lift;
  if (far_field != FarField::kZero) lift = ExplicitKernel::make(q);
  return solve_on_grid(op, grid, 1.0, far_field, lift ? &*lift : nullptr, rtol, max_iter);
}

Field resample_rescaled(const GreensTable& base, const Grid& target, double lambda) {
  const int dim = target.dim;
  const double shift = std::pow(lambda, 1.0 / dim);
  const double amp = std::pow(lambda, (dim - 2.0) / dim);
  if (base.grid.r_box < shift * target.r_box - 1e-12)
    throw std::invalid_argument("base kernel table does not cover the rescaled box");
  Field out = target.make_field();
  std::vector<int> idx(static_cast<size_t>(dim), 0);
  std::vector<double> x(static_cast<size_t>(dim), 0.0);
  for (std::int64_t c = 0; c < target.ncells; ++c) {
    target.center(idx.data(), x.data());
    for (int d = 0; d < dim; ++d) x[static_cast<size_t>(d)] *= shift;
    out[static_cast<size_t>(c)] = amp * interpolate(base.grid, base.values, x.data());
    for (int d = 0; d < dim; ++d) {
      if (++idx[static_cast<size_t>(d)] < target.cells_per_axis) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
  return out;
}

double delta_test(const ExplicitKernel& kernel, double r_box, double h) {
  const int dim = kernel.dim;
  Grid grid = Grid::make(dim, r_box, h);
  const double sigma = r_box / 5.0;
  const double inv_s2 = 1.0 / (sigma * sigma);
  const double trace_q = kernel.q.trace();

  std::vector<int> idx(static_cast<size_t>(dim), 0);
  std::vector<double> x(static_cast<size_t>(dim), 0.0);
  const std::int64_t mid = grid.encode(
      std::vector<int>(static_cast<size_t>(dim), (grid.cells_per_axis - 1) / 2).data());
  double acc = 0.0;
  for (std::int64_t c = 0; c < grid.ncells; ++c) {
    if (c != mid) {
      grid.center(idx.data(), x.data());
      double r2 = 0.0, xqx = 0.0;
      for (int i = 0; i < dim; ++i) {
        r2 += x[static_cast<size_t>(i)] * x[static_cast<size_t>(i)];
        for (int j = 0; j < dim; ++j)
          xqx += x[static_cast<size_t>(i)] * kernel.q(i, j) * x[static_cast<size_t>(j)];
      }
      const double phi = std::exp(-0.5 * r2 * inv_s2);
      const double lap_phi = (xqx * inv_s2 * inv_s2 - trace_q * inv_s2) * phi;
      acc += -lap_phi * kernel.value(x.data());
    }
    for (int d = 0; d < dim; ++d) {
      if (++idx[static_cast<size_t>(d)] < grid.cells_per_axis) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
  return acc * std::pow(grid.h, dim);
}

KernelBounds kernel_bounds(const GreensTable& table, double r_lo, double r_hi) {
  const Grid& g = table.grid;
  const int dim = g.dim;
  KernelBounds kb;
  kb.c_upper = -1e300;
  kb.c_lower = 1e300;
  kb.m_gradient_low = 1e300;
  std::vector<int> idx(static_cast<size_t>(dim), 0);
  for (std::int64_t c = 0; c < g.ncells; ++c) {
    const double r = g.radius(idx.data());
    if (r >= r_lo && r <= r_hi && !g.on_outer_layer(idx.data())) {
      ++kb.ncells;
      const double gv = table.values[static_cast<size_t>(c)];
      if (gv <= 0.0) kb.positive = false;
      const double ratio = gv * std::pow(r, dim - 2);
      kb.c_upper = std::max(kb.c_upper, ratio);
      kb.c_lower = std::min(kb.c_lower, ratio);
      double grad2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        const std::int64_t sd = g.stride[static_cast<size_t>(d)];
        const double der = (table.values[static_cast<size_t>(c + sd)] -
                            table.values[static_cast<size_t>(c - sd)]) / (2.0 * g.h);
        grad2 += der * der;
      }
      kb.m_gradient = std::max(kb.m_gradient, std::sqrt(grad2) * std::pow(r, dim - 1));
      kb.m_gradient_low = std::min(kb.m_gradient_low, std::sqrt(grad2) * std::pow(r, dim - 1));
    }
    for (int d = 0; d < dim; ++d) {
      if (++idx[static_cast<size_t>(d)] < g.cells_per_axis) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
  if (kb.ncells == 0) throw std::invalid_argument("annulus contains no cells");
  kb.c_bound = kb.positive ? std::max(kb.c_upper, 1.0 / kb.c_lower) : 1e300;
  return kb;
}

double annulus_sup_diff(const Grid& grid, const Field& a, const Field& b,
                        double r_lo, double r_hi) {
  std::vector<int> idx(static_cast<size_t>(grid.dim), 0);
  double sup = 0.0;
  bool any = false;
  for (std::int64_t c = 0; c < grid.ncells; ++c) {
    const double r = grid.radius(idx.data());
    if (r >= r_lo && r <= r_hi) {
      any = true;
      sup = std::max(sup, std::fabs(a[static_cast<size_t>(c)] - b[static_cast<size_t>(c)]));
    }
    for (int d = 0; d < grid.dim; ++d) {
      if (++idx[static_cast<size_t>(d)] < grid.cells_per_axis) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
  if (!any) throw std::invalid_argument("annulus contains no cells");
  return sup;
}

double annulus_max_rel_err(const GreensTable& table, const ExplicitKernel& kernel,
                           double r_lo, double r_hi) {
  const Grid& g = table.grid;
  std::vector<int> idx(static_cast<size_t>(g.dim), 0);
  std::vector<double> x(static_cast<size_t>(g.dim), 0.0);
  double worst = 0.0;
  bool any = false;
  for (std::int64_t c = 0; c < g.ncells; ++c) {
    const double r = g.radius(idx.data());
    if (r >= r_lo && r <= r_hi) {
      any = true;
      g.center(idx.data(), x.data());
      const double ref = kernel.value(x.data());
      worst = std::max(worst, std::fabs(table.values[static_cast<size_t>(c)] / ref - 1.0));
    }
    for (int d = 0; d < g.dim; ++d) {
      if (++idx[static_cast<size_t>(d)] < g.cells_per_axis) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
  if (!any) throw std::invalid_argument("annulus contains no cells");
  return worst;
}

}  // namespace stefan
