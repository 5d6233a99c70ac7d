#include "stefan/pcg.hpp"

#include <cmath>
#include <stdexcept>

namespace stefan {

PcgResult pcg_solve(const StencilOperator& op, const std::vector<CellKind>& kind,
                    double tau, const Field& b, Field& u, double rtol, int max_iter) {
  const Grid& g = op.grid();
  const std::int64_t n = g.ncells;
  if (static_cast<std::int64_t>(b.size()) != n || static_cast<std::int64_t>(u.size()) != n ||
      static_cast<std::int64_t>(kind.size()) != n)
    throw std::invalid_argument("pcg_solve: field sizes do not match the grid");

  std::vector<std::int64_t> free_cells;
  free_cells.reserve(static_cast<size_t>(n));
  for (std::int64_t c = 0; c < n; ++c)
    if (kind[static_cast<size_t>(c)] == CellKind::kFree) free_cells.push_back(c);

  PcgResult res;
  if (free_cells.empty()) {
    res.converged = true;
    return res;
  }

  Field r(static_cast<size_t>(n), 0.0), z(static_cast<size_t>(n), 0.0);
  Field p(static_cast<size_t>(n), 0.0), q(static_cast<size_t>(n), 0.0);

  double bnorm2 = 0.0;
  for (std::int64_t c : free_cells) {
    const double bc = b[static_cast<size_t>(c)];
    bnorm2 += bc * bc;
  }

  for (std::int64_t c : free_cells) {
    r[static_cast<size_t>(c)] =
        b[static_cast<size_t>(c)] - tau * u[static_cast<size_t>(c)] - op.apply_neg_row(u, c);
  }

  double rz = 0.0, rnorm2 = 0.0;
  for (std::int64_t c : free_cells) {
    const double rc = r[static_cast<size_t>(c)];
    const double zc = rc / (tau + op.diag(c));
    z[static_cast<size_t>(c)] = zc;
    p[static_cast<size_t>(c)] = zc;
    rz += rc * zc;
    rnorm2 += rc * rc;
  }

  // Zero right-hand sides are routine here (pure Dirichlet-data solves), so
  // the target scales with the initial residual as well as with ||b||.
  const double ref2 = std::max({bnorm2, rnorm2, 1e-300});
  const double stop2 = rtol * rtol * ref2;

  int it = 0;
  while (rnorm2 > stop2 && it < max_iter) {
    ++it;
    double pq = 0.0;
    for (std::int64_t c : free_cells) {
      const double qc = tau * p[static_cast<size_t>(c)] + op.apply_neg_row(p, c);
      q[static_cast<size_t>(c)] = qc;
      pq += p[static_cast<size_t>(c)] * qc;
    }
    if (pq <= 0.0) break;  // loss of positive definiteness in finite precision
    const double alpha = rz / pq;
    rnorm2 = 0.0;
    for (std::int64_t c : free_cells) {
      u[static_cast<size_t>(c)] += alpha * p[static_cast<size_t>(c)];
      const double rc = r[static_cast<size_t>(c)] - alpha * q[static_cast<size_t>(c)];
      r[static_cast<size_t>(c)] = rc;
      rnorm2 += rc * rc;
    }
    double rz_new = 0.0;
    for (std::int64_t c : free_cells) {
      const double zc = r[static_cast<size_t>(c)] / (tau + op.diag(c));
      z[static_cast<size_t>(c)] = zc;
      rz_new += r[static_cast<size_t>(c)] * zc;
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::int64_t c : free_cells)
      p[static_cast<size_t>(c)] = z[static_cast<size_t>(c)] + beta * p[static_cast<size_t>(c)];
  }

  res.iterations = it;
  res.rel_residual = std::sqrt(rnorm2 / ref2);
  res.converged = rnorm2 <= stop2;
  return res;
}

}  // namespace stefan
