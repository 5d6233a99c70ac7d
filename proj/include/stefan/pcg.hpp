#pragma once

#include <cstdint>
#include <vector>

#include "stefan/grid.hpp"

namespace stefan {

struct PcgResult {
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
};

// Jacobi-preconditioned conjugate gradients for (tau I - L) u = b on the free
// cells, matrix-free. Constrained cells (source, outer layer) keep whatever
// values u carries on entry and act as Dirichlet data for their neighbors.
PcgResult pcg_solve(const StencilOperator& op, const std::vector<CellKind>& kind,
                    double tau, const Field& b, Field& u,
                    double rtol = 1e-10, int max_iter = 20000);

}  // namespace stefan
