#include "stefan/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace stefan {

Grid Grid::make(int dim, double r_box, double h_target) {
  if (dim < 1) throw std::invalid_argument("grid dimension must be >= 1");
  if (r_box <= 0.0 || h_target <= 0.0)
    throw std::invalid_argument("grid extent and spacing must be positive");
  Grid g;
  g.dim = dim;
  const int m = std::max(1, static_cast<int>(std::ceil(r_box / h_target - 1e-12)));
  g.cells_per_axis = 2 * m + 1;
  g.h = r_box / m;
  g.r_box = r_box;
  g.stride.resize(static_cast<size_t>(dim));
  std::int64_t s = 1;
  for (int d = 0; d < dim; ++d) {
    g.stride[static_cast<size_t>(d)] = s;
    s *= g.cells_per_axis;
  }
  g.ncells = s;
  return g;
}

double Grid::radius(const int* idx) const {
  double r2 = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double x = coord(idx[d]);
    r2 += x * x;
  }
  return std::sqrt(r2);
}

DomainMasks build_masks(const Grid& g, double r_source) {
  if (r_source < 0.0) throw std::invalid_argument("source radius must be >= 0");
  if (r_source > 0.0 && r_source + 2.0 * g.h >= g.r_box)
    throw std::invalid_argument("source ball leaves no room inside the box");

  DomainMasks m;
  m.kind.assign(static_cast<size_t>(g.ncells), CellKind::kFree);
  std::vector<int> idx(static_cast<size_t>(g.dim), 0);
  for (std::int64_t c = 0; c < g.ncells; ++c) {
    if (g.on_outer_layer(idx.data())) {
      m.kind[static_cast<size_t>(c)] = CellKind::kOuter;
      ++m.n_outer;
    } else if (r_source > 0.0 && g.radius(idx.data()) <= r_source) {
      m.kind[static_cast<size_t>(c)] = CellKind::kSource;
      ++m.n_source;
    }
    for (int d = 0; d < g.dim; ++d) {
      if (++idx[static_cast<size_t>(d)] < g.cells_per_axis) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
  m.n_free = g.ncells - m.n_source - m.n_outer;
  if (r_source > 0.0 && m.n_source == 0)
    throw std::invalid_argument("source ball contains no cell center; refine the grid");
  return m;
}

StencilOperator::StencilOperator(const Grid& grid, const CoefficientField& media, double shift)
    : grid_(grid), dim_(grid.dim), shift_(shift) {
  if (media.dim != grid.dim)
    throw std::invalid_argument("media dimension does not match the grid");
  inv_h2_ = 1.0 / (grid.h * grid.h);
  inv_2h_ = 0.5 / grid.h;

  const std::int64_t n = grid.ncells;
  std::vector<int> idx(static_cast<size_t>(dim_), 0);
  std::vector<double> x(static_cast<size_t>(dim_), 0.0);

  face_.assign(static_cast<size_t>(dim_), std::vector<double>(static_cast<size_t>(n), 0.0));
  for (int k = 0; k < dim_; ++k) {
    std::fill(idx.begin(), idx.end(), 0);
    std::vector<double>& fk = face_[static_cast<size_t>(k)];
    for (std::int64_t c = 0; c < n; ++c) {
      grid.center(idx.data(), x.data());
      x[static_cast<size_t>(k)] -= 0.5 * grid.h;
      for (int d = 0; d < dim_; ++d) x[static_cast<size_t>(d)] *= shift;
      fk[static_cast<size_t>(c)] = media.entry(k, k, x.data());
      for (int d = 0; d < dim_; ++d) {
        if (++idx[static_cast<size_t>(d)] < grid.cells_per_axis) break;
        idx[static_cast<size_t>(d)] = 0;
      }
    }
  }

  for (const auto& [pi, pj] : media.offdiag_pairs) {
    CrossPlane plane;
    plane.i = pi;
    plane.j = pj;
    plane.si = grid.stride[static_cast<size_t>(pi)];
    plane.sj = grid.stride[static_cast<size_t>(pj)];
    plane.corner.assign(static_cast<size_t>(n), 0.0);
    std::fill(idx.begin(), idx.end(), 0);
    for (std::int64_t c = 0; c < n; ++c) {
      grid.center(idx.data(), x.data());
      x[static_cast<size_t>(pi)] += 0.5 * grid.h;
      x[static_cast<size_t>(pj)] += 0.5 * grid.h;
      for (int d = 0; d < dim_; ++d) x[static_cast<size_t>(d)] *= shift;
      plane.corner[static_cast<size_t>(c)] = media.entry(pi, pj, x.data());
      for (int d = 0; d < dim_; ++d) {
        if (++idx[static_cast<size_t>(d)] < grid.cells_per_axis) break;
        idx[static_cast<size_t>(d)] = 0;
      }
    }
    cross_.push_back(std::move(plane));
  }

  diag_.assign(static_cast<size_t>(n), 1.0);
  std::fill(idx.begin(), idx.end(), 0);
  for (std::int64_t c = 0; c < n; ++c) {
    if (!grid.on_outer_layer(idx.data())) {
      double d2 = 0.0;
      for (int k = 0; k < dim_; ++k) {
        const std::int64_t sk = grid.stride[static_cast<size_t>(k)];
        d2 += face_[static_cast<size_t>(k)][static_cast<size_t>(c)] +
              face_[static_cast<size_t>(k)][static_cast<size_t>(c + sk)];
      }
      d2 *= inv_h2_;
      for (const CrossPlane& p : cross_) {
        const double a_uu = p.corner[static_cast<size_t>(c)];
        const double a_ll = p.corner[static_cast<size_t>(c - p.si - p.sj)];
        const double a_ul = p.corner[static_cast<size_t>(c - p.sj)];
        const double a_lu = p.corner[static_cast<size_t>(c - p.si)];
        d2 += (a_uu + a_ll - a_ul - a_lu) * 0.5 * inv_h2_;
      }
      diag_[static_cast<size_t>(c)] = d2;
    }
    for (int d = 0; d < dim_; ++d) {
      if (++idx[static_cast<size_t>(d)] < grid.cells_per_axis) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
}

double StencilOperator::apply_neg_row(const Field& u, std::int64_t c) const {
  const Grid& g = grid_;
  const double uc = u[static_cast<size_t>(c)];
  double s = 0.0;
  for (int k = 0; k < dim_; ++k) {
    const std::int64_t sk = g.stride[static_cast<size_t>(k)];
    const std::vector<double>& fk = face_[static_cast<size_t>(k)];
    s += fk[static_cast<size_t>(c)] * (uc - u[static_cast<size_t>(c - sk)]) +
         fk[static_cast<size_t>(c + sk)] * (uc - u[static_cast<size_t>(c + sk)]);
  }
  s *= inv_h2_;
  for (const CrossPlane& p : cross_) {
    double acc = 0.0;
    for (int a = 0; a <= 1; ++a) {
      for (int b = 0; b <= 1; ++b) {
        const std::int64_t d = c - (a ? p.si : 0) - (b ? p.sj : 0);
        const double coef = p.corner[static_cast<size_t>(d)];
        const double u00 = u[static_cast<size_t>(d)];
        const double u10 = u[static_cast<size_t>(d + p.si)];
        const double u01 = u[static_cast<size_t>(d + p.sj)];
        const double u11 = u[static_cast<size_t>(d + p.si + p.sj)];
        const double di = u10 + u11 - u00 - u01;
        const double dj = u01 + u11 - u00 - u10;
        const double s_i = a ? 1.0 : -1.0;
        const double s_j = b ? 1.0 : -1.0;
        acc += coef * (s_j * di + s_i * dj);
      }
    }
    s += acc * inv_2h_ * inv_2h_;
  }
  return s;
}

void StencilOperator::apply_neg(const Field& u, Field& out) const {
  const Grid& g = grid_;
  out.assign(static_cast<size_t>(g.ncells), 0.0);
  std::vector<int> idx(static_cast<size_t>(dim_), 0);
  for (std::int64_t c = 0; c < g.ncells; ++c) {
    if (!g.on_outer_layer(idx.data())) out[static_cast<size_t>(c)] = apply_neg_row(u, c);
    for (int d = 0; d < dim_; ++d) {
      if (++idx[static_cast<size_t>(d)] < g.cells_per_axis) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
}

double interpolate(const Grid& g, const Field& u, const double* x) {
  const int dim = g.dim;
  int base[8];
  double frac[8];
  for (int d = 0; d < dim; ++d) {
    double f = (std::min(std::max(x[d], -g.r_box), g.r_box) + g.r_box) / g.h;
    int i0 = static_cast<int>(std::floor(f));
    if (i0 < 0) i0 = 0;
    if (i0 > g.cells_per_axis - 2) i0 = g.cells_per_axis - 2;
    base[d] = i0;
    frac[d] = f - i0;
  }
  double acc = 0.0;
  const int ncorner = 1 << dim;
  for (int corner = 0; corner < ncorner; ++corner) {
    double w = 1.0;
    std::int64_t c = 0;
    for (int d = 0; d < dim; ++d) {
      const int bit = (corner >> d) & 1;
      w *= bit ? frac[d] : 1.0 - frac[d];
      c += g.stride[static_cast<size_t>(d)] * (base[d] + bit);
    }
    acc += w * u[static_cast<size_t>(c)];
  }
  return acc;
}

double linf_norm(const Field& u) {
  double m = 0.0;
  for (double v : u) m = std::max(m, std::fabs(v));
  return m;
}

double linf_diff(const Field& a, const Field& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace stefan
