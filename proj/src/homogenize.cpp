#include "stefan/homogenize.hpp"

#include <cmath>
#include <stdexcept>

namespace stefan {

namespace {

// Flat periodic lattice over the unit cell, cell centers at (i + 1/2) h.
struct PeriodicCell {
  int dim = 0;
  int n = 0;
  double h = 0.0;
  std::int64_t ncells = 0;
  std::vector<std::int64_t> stride;

  PeriodicCell(int dim_, int n_) : dim(dim_), n(n_), h(1.0 / n_) {
    stride.resize(static_cast<size_t>(dim));
    std::int64_t s = 1;
    for (int d = 0; d < dim; ++d) {
      stride[static_cast<size_t>(d)] = s;
      s *= n;
    }
    ncells = s;
  }

  std::int64_t plus(std::int64_t c, int k, const int* idx) const {
    const std::int64_t s = stride[static_cast<size_t>(k)];
    return idx[k] + 1 == n ? c + s - s * n : c + s;
  }
  std::int64_t minus(std::int64_t c, int k, const int* idx) const {
    const std::int64_t s = stride[static_cast<size_t>(k)];
    return idx[k] == 0 ? c - s + s * n : c - s;
  }
  void advance(int* idx) const {
    for (int d = 0; d < dim; ++d) {
      if (++idx[d] < n) break;
      idx[d] = 0;
    }
  }
};

struct CrossPlane {
  int i, j;
  std::vector<double> corner;  // a_ij at the (+,+) corner of each cell
};

// Periodic analogue of the box stencil: face and corner coefficient tables
// plus the energy-induced apply.
struct PeriodicOperator {
  const PeriodicCell* pc;
  std::vector<std::vector<double>> face;  // a_kk at the minus-face of each cell
  std::vector<CrossPlane> cross;
  std::vector<double> diag;

  PeriodicOperator(const PeriodicCell& cell, const CoefficientField& media) : pc(&cell) {
    const int dim = cell.dim;
    std::vector<int> idx(static_cast<size_t>(dim), 0);
    std::vector<double> x(static_cast<size_t>(dim), 0.0);

    face.assign(static_cast<size_t>(dim),
                std::vector<double>(static_cast<size_t>(cell.ncells), 0.0));
    for (int k = 0; k < dim; ++k) {
      std::fill(idx.begin(), idx.end(), 0);
      for (std::int64_t c = 0; c < cell.ncells; ++c) {
        for (int d = 0; d < dim; ++d) x[static_cast<size_t>(d)] = (idx[static_cast<size_t>(d)] + 0.5) * cell.h;
        x[static_cast<size_t>(k)] -= 0.5 * cell.h;
        face[static_cast<size_t>(k)][static_cast<size_t>(c)] = media.entry(k, k, x.data());
        cell.advance(idx.data());
      }
    }

    for (const auto& [pi, pj] : media.offdiag_pairs) {
      CrossPlane plane;
      plane.i = pi;
      plane.j = pj;
      plane.corner.assign(static_cast<size_t>(cell.ncells), 0.0);
      std::fill(idx.begin(), idx.end(), 0);
      for (std::int64_t c = 0; c < cell.ncells; ++c) {
        for (int d = 0; d < dim; ++d) x[static_cast<size_t>(d)] = (idx[static_cast<size_t>(d)] + 0.5) * cell.h;
        x[static_cast<size_t>(pi)] += 0.5 * cell.h;
        x[static_cast<size_t>(pj)] += 0.5 * cell.h;
        plane.corner[static_cast<size_t>(c)] = media.entry(pi, pj, x.data());
        cell.advance(idx.data());
      }
      cross.push_back(std::move(plane));
    }

    const double inv_h2 = 1.0 / (cell.h * cell.h);
    diag.assign(static_cast<size_t>(cell.ncells), 0.0);
    std::fill(idx.begin(), idx.end(), 0);
    for (std::int64_t c = 0; c < cell.ncells; ++c) {
      double d2 = 0.0;
      for (int k = 0; k < dim; ++k)
        d2 += face[static_cast<size_t>(k)][static_cast<size_t>(c)] +
              face[static_cast<size_t>(k)][static_cast<size_t>(cell.plus(c, k, idx.data()))];
      d2 *= inv_h2;
      for (const CrossPlane& p : cross) {
        const std::int64_t cmi = cell.minus(c, p.i, idx.data());
        const std::int64_t cmj = cell.minus(c, p.j, idx.data());
        // minus in j then minus in i needs the j-decremented odometer; redo by index math
        int tmp[8];
        for (int d = 0; d < dim; ++d) tmp[d] = idx[static_cast<size_t>(d)];
        tmp[p.j] = (tmp[p.j] + cell.n - 1) % cell.n;
        const std::int64_t cmij = cell.minus(cmj, p.i, tmp);
        const double a_uu = p.corner[static_cast<size_t>(c)];
        const double a_ll = p.corner[static_cast<size_t>(cmij)];
        const double a_ul = p.corner[static_cast<size_t>(cmj)];
        const double a_lu = p.corner[static_cast<size_t>(cmi)];
        d2 += (a_uu + a_ll - a_ul - a_lu) * 0.5 * inv_h2;
      }
      diag[static_cast<size_t>(c)] = d2;
      cell.advance(idx.data());
    }
  }

  // out = (-L u), u periodic
  void apply(const std::vector<double>& u, std::vector<double>& out) const {
    const PeriodicCell& cell = *pc;
    const int dim = cell.dim;
    const double inv_h2 = 1.0 / (cell.h * cell.h);
    const double inv_4h2 = 0.25 * inv_h2;
    out.assign(static_cast<size_t>(cell.ncells), 0.0);
    std::vector<int> idx(static_cast<size_t>(dim), 0);
    for (std::int64_t c = 0; c < cell.ncells; ++c) {
      const double uc = u[static_cast<size_t>(c)];
      double s = 0.0;
      for (int k = 0; k < dim; ++k) {
        const std::int64_t cp = cell.plus(c, k, idx.data());
        const std::int64_t cm = cell.minus(c, k, idx.data());
        s += face[static_cast<size_t>(k)][static_cast<size_t>(c)] * (uc - u[static_cast<size_t>(cm)]) +
             face[static_cast<size_t>(k)][static_cast<size_t>(cp)] * (uc - u[static_cast<size_t>(cp)]);
      }
      s *= inv_h2;
      for (const CrossPlane& p : cross) {
        double acc = 0.0;
        int tmp[8];
        for (int a = 0; a <= 1; ++a) {
          for (int b = 0; b <= 1; ++b) {
            for (int d = 0; d < dim; ++d) tmp[d] = idx[static_cast<size_t>(d)];
            if (a) tmp[p.i] = (tmp[p.i] + cell.n - 1) % cell.n;
            if (b) tmp[p.j] = (tmp[p.j] + cell.n - 1) % cell.n;
            std::int64_t d0 = 0;
            for (int d = 0; d < dim; ++d) d0 += cell.stride[static_cast<size_t>(d)] * tmp[d];
            const std::int64_t d10 = cell.plus(d0, p.i, tmp);
            const std::int64_t d01 = cell.plus(d0, p.j, tmp);
            int tmp2[8];
            for (int d = 0; d < dim; ++d) tmp2[d] = tmp[d];
            tmp2[p.i] = (tmp2[p.i] + 1) % cell.n;
            const std::int64_t d11 = cell.plus(d10, p.j, tmp2);
            const double u00 = u[static_cast<size_t>(d0)];
            const double u10 = u[static_cast<size_t>(d10)];
            const double u01 = u[static_cast<size_t>(d01)];
            const double u11 = u[static_cast<size_t>(d11)];
            const double di = u10 + u11 - u00 - u01;
            const double dj = u01 + u11 - u00 - u10;
            const double s_i = a ? 1.0 : -1.0;
            const double s_j = b ? 1.0 : -1.0;
            acc += p.corner[static_cast<size_t>(d0)] * (s_j * di + s_i * dj);
          }
        }
        s += acc * inv_4h2;
      }
      out[static_cast<size_t>(c)] = s;
      cell.advance(idx.data());
    }
  }
};

void subtract_mean(std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  for (double& x : v) x -= m;
}

// Jacobi-preconditioned CG on the periodic lattice; the constant null space
// is projected out of the iterates.
std::pair<int, double> cg_periodic(const PeriodicOperator& op, const std::vector<double>& b,
                                   std::vector<double>& u, double rtol, int max_iter) {
  const size_t n = b.size();
  std::vector<double> r(n), z(n), p(n), q(n);
  op.apply(u, r);
  for (size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
  subtract_mean(r);

  double bnorm2 = 0.0;
  for (size_t i = 0; i < n; ++i) bnorm2 += b[i] * b[i];

  double rz = 0.0, rnorm2 = 0.0;
  for (size_t i = 0; i < n; ++i) {
    z[i] = r[i] / std::max(op.diag[i], 1e-300);
    p[i] = z[i];
    rz += r[i] * z[i];
    rnorm2 += r[i] * r[i];
  }
  // Nearly-constant media make b (and r0) tiny; scale the target with both so
  // the loop cannot chase an unreachable threshold.
  const double ref2 = std::max({bnorm2, rnorm2, 1e-300});
  const double stop2 = rtol * rtol * ref2;

  int it = 0;
  while (rnorm2 > stop2 && it < max_iter) {
    ++it;
    op.apply(p, q);
    double pq = 0.0;
    for (size_t i = 0; i < n; ++i) pq += p[i] * q[i];
    if (pq <= 0.0) break;
    const double alpha = rz / pq;
    rnorm2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
      u[i] += alpha * p[i];
      r[i] -= alpha * q[i];
      rnorm2 += r[i] * r[i];
    }
    if (it % 50 == 0) subtract_mean(r);
    double rz_new = 0.0;
    for (size_t i = 0; i < n; ++i) {
      z[i] = r[i] / std::max(op.diag[i], 1e-300);
      rz_new += r[i] * z[i];
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  subtract_mean(u);
  return {it, std::sqrt(rnorm2 / ref2)};
}

}  // namespace

CellProblemResult solve_cell_problems(const CoefficientField& media, int resolution,
                                      double rtol, int max_iter) {
  if (resolution < 2) throw std::invalid_argument("cell resolution must be >= 2");
  const int dim = media.dim;
  if (dim > 8) throw std::invalid_argument("cell problems support dim <= 8");
  PeriodicCell cell(dim, resolution);
  PeriodicOperator op(cell, media);

  CellProblemResult out;
  out.resolution = resolution;
  out.correctors.assign(static_cast<size_t>(dim),
                        std::vector<double>(static_cast<size_t>(cell.ncells), 0.0));

  std::vector<int> idx(static_cast<size_t>(dim), 0);
  const double inv_h = 1.0 / cell.h;
  const double inv_2h = 0.5 * inv_h;

  // RHS for corrector k: the discrete divergence of column k of A, assembled
  // from the same face/corner samples as the energy.
  for (int k = 0; k < dim; ++k) {
    std::vector<double> rhs(static_cast<size_t>(cell.ncells), 0.0);
    std::fill(idx.begin(), idx.end(), 0);
    for (std::int64_t c = 0; c < cell.ncells; ++c) {
      const std::int64_t cp = cell.plus(c, k, idx.data());
      double r = (op.face[static_cast<size_t>(k)][static_cast<size_t>(cp)] -
                  op.face[static_cast<size_t>(k)][static_cast<size_t>(c)]) * inv_h;
      for (const CrossPlane& p : op.cross) {
        int other = -1;
        if (p.i == k) other = p.j;
        else if (p.j == k) other = p.i;
        if (other < 0) continue;
        // corners of the (k, other) plane around c; s is the sign of c in the
        // difference along 'other'
        int tmp[8];
        for (int a = 0; a <= 1; ++a) {
          for (int b = 0; b <= 1; ++b) {
            for (int d = 0; d < dim; ++d) tmp[d] = idx[static_cast<size_t>(d)];
            if (a) tmp[p.i] = (tmp[p.i] + cell.n - 1) % cell.n;
            if (b) tmp[p.j] = (tmp[p.j] + cell.n - 1) % cell.n;
            std::int64_t d0 = 0;
            for (int d = 0; d < dim; ++d) d0 += cell.stride[static_cast<size_t>(d)] * tmp[d];
            const double s_other = (p.i == other ? (a ? 1.0 : -1.0) : (b ? 1.0 : -1.0));
            r -= p.corner[static_cast<size_t>(d0)] * s_other * inv_2h;
          }
        }
      }
      rhs[static_cast<size_t>(c)] = r;
      cell.advance(idx.data());
    }
    subtract_mean(rhs);
    auto [iters, rel] = cg_periodic(op, rhs, out.correctors[static_cast<size_t>(k)], rtol, max_iter);
    out.cg_iterations.push_back(iters);
    out.cg_residuals.push_back(rel);
  }

  // q_ij = <a_ij> + <(A D chi_j)_i>, face samples for the i = k terms and
  // corner samples for i != k, matching the energy quadrature.
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(dim, dim);
  const double w = 1.0 / static_cast<double>(cell.ncells);
  for (int j = 0; j < dim; ++j) {
    const std::vector<double>& chi = out.correctors[static_cast<size_t>(j)];
    std::fill(idx.begin(), idx.end(), 0);
    for (std::int64_t c = 0; c < cell.ncells; ++c) {
      for (int i = 0; i < dim; ++i) {
        const std::int64_t cm = cell.minus(c, i, idx.data());
        const double grad_i = (chi[static_cast<size_t>(c)] - chi[static_cast<size_t>(cm)]) * inv_h;
        const double a_f = op.face[static_cast<size_t>(i)][static_cast<size_t>(c)];
        q(i, j) += w * a_f * ((i == j ? 1.0 : 0.0) + grad_i);
      }
      for (const CrossPlane& p : op.cross) {
        // corner owned by c: cells c, c+ei, c+ej, c+ei+ej
        const std::int64_t c10 = cell.plus(c, p.i, idx.data());
        const std::int64_t c01 = cell.plus(c, p.j, idx.data());
        int tmp[8];
        for (int d = 0; d < dim; ++d) tmp[d] = idx[static_cast<size_t>(d)];
        tmp[p.i] = (tmp[p.i] + 1) % cell.n;
        const std::int64_t c11 = cell.plus(c10, p.j, tmp);
        const double di = (chi[static_cast<size_t>(c10)] + chi[static_cast<size_t>(c11)] -
                           chi[static_cast<size_t>(c)] - chi[static_cast<size_t>(c01)]) * inv_2h;
        const double dj = (chi[static_cast<size_t>(c01)] + chi[static_cast<size_t>(c11)] -
                           chi[static_cast<size_t>(c)] - chi[static_cast<size_t>(c10)]) * inv_2h;
        const double a_cr = p.corner[static_cast<size_t>(c)];
        // <a_ij D_j chi_.> enters row i and <a_ji D_i chi_.> enters row j
        q(p.i, j) += w * a_cr * dj;
        q(p.j, j) += w * a_cr * di;
        if (p.j == j) q(p.i, j) += w * a_cr;  // <a_ij> itself
        if (p.i == j) q(p.j, j) += w * a_cr;
      }
      cell.advance(idx.data());
    }
  }

  out.q_raw = q;
  out.q = 0.5 * (q + q.transpose());
  out.asym_residual = (q - q.transpose()).cwiseAbs().maxCoeff();

  // Voigt / Reuss means and <1/g> at cell centers.
  Eigen::MatrixXd mean_a = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd mean_ainv = Eigen::MatrixXd::Zero(dim, dim);
  double l_avg = 0.0;
  std::vector<double> x(static_cast<size_t>(dim), 0.0);
  std::fill(idx.begin(), idx.end(), 0);
  for (std::int64_t c = 0; c < cell.ncells; ++c) {
    for (int d = 0; d < dim; ++d) x[static_cast<size_t>(d)] = (idx[static_cast<size_t>(d)] + 0.5) * cell.h;
    Eigen::MatrixXd a = media.matrix_at(x.data());
    mean_a += a;
    mean_ainv += a.inverse();
    l_avg += 1.0 / media.g(x.data());
    cell.advance(idx.data());
  }
  out.voigt = mean_a * w;
  out.reuss = (mean_ainv * w).inverse();
  out.l_avg = l_avg * w;
  return out;
}

Eigen::MatrixXd sqrt_spd(const Eigen::MatrixXd& q) {
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + q.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("sqrt_spd: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("sqrt_spd: matrix is not positive definite");
  return es.operatorSqrt();
}

std::vector<AveragingRow> averaging_check(const CoefficientField& media,
                                          const std::vector<double>& eps_list,
                                          int resolution) {
  const int dim = media.dim;
  if (dim > 8) throw std::invalid_argument("averaging_check supports dim <= 8");
  // Box [0,2]^dim, Gaussian bump at the center; midpoint quadrature.
  const double box = 2.0;
  const double h = box / resolution;
  const double sigma = 0.35;

  std::int64_t ncells = 1;
  for (int d = 0; d < dim; ++d) ncells *= resolution;

  // Reference average of 1/g on the same lattice (periodic sampling of a
  // trigonometric g is quadrature-exact to machine precision).
  PeriodicCell cell(dim, resolution);
  std::vector<int> idx(static_cast<size_t>(dim), 0);
  std::vector<double> y(static_cast<size_t>(dim), 0.0);
  double l_avg = 0.0;
  for (std::int64_t c = 0; c < cell.ncells; ++c) {
    for (int d = 0; d < dim; ++d) y[static_cast<size_t>(d)] = (idx[static_cast<size_t>(d)] + 0.5) / resolution;
    l_avg += 1.0 / media.g(y.data());
    cell.advance(idx.data());
  }
  l_avg /= static_cast<double>(cell.ncells);

  std::vector<AveragingRow> table;
  for (double eps : eps_list) {
    std::fill(idx.begin(), idx.end(), 0);
    double I_osc = 0.0, I_phi = 0.0;
    std::vector<double> x(static_cast<size_t>(dim), 0.0);
    for (std::int64_t c = 0; c < ncells; ++c) {
      double r2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        x[static_cast<size_t>(d)] = (idx[static_cast<size_t>(d)] + 0.5) * h;
        const double dx = x[static_cast<size_t>(d)] - 0.5 * box;
        r2 += dx * dx;
      }
      const double phi = std::exp(-r2 / (2.0 * sigma * sigma));
      for (int d = 0; d < dim; ++d) y[static_cast<size_t>(d)] = x[static_cast<size_t>(d)] / eps;
      I_osc += phi / media.g(y.data());
      I_phi += phi;
      for (int d = 0; d < dim; ++d) {
        if (++idx[static_cast<size_t>(d)] < resolution) break;
        idx[static_cast<size_t>(d)] = 0;
      }
    }
    const double vol = std::pow(h, dim);
    table.push_back({eps, std::fabs(I_osc * vol - l_avg * I_phi * vol)});
  }
  return table;
}

}  // namespace stefan
