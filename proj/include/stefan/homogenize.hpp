#pragma once

#include <vector>

#include <Eigen/Dense>

#include "stefan/media.hpp"

namespace stefan {

struct CellProblemResult {
  Eigen::MatrixXd q;        // symmetrized effective tensor
  Eigen::MatrixXd q_raw;    // before symmetrization
  double asym_residual = 0.0;
  double l_avg = 0.0;       // cell average of 1/g
  Eigen::MatrixXd voigt;    // arithmetic mean of A
  Eigen::MatrixXd reuss;    // inverse of the mean of A^-1
  int resolution = 0;
  std::vector<int> cg_iterations;
  std::vector<double> cg_residuals;
  std::vector<std::vector<double>> correctors;  // chi_k, cell-centered, mean zero
};

// Solves the dim periodic corrector problems div(A(y)(e_k + D chi_k)) = 0 on
// the unit cell at the given resolution per axis and assembles
// q_ij = <e_i' A (e_j + D chi_j)> with the same face/corner sampling the
// discrete energy uses, so layered media reproduce their harmonic means to
// quadrature precision.
CellProblemResult solve_cell_problems(const CoefficientField& media, int resolution,
                                      double rtol = 1e-12, int max_iter = 50000);

// Symmetric positive definite square root (spectral); throws if not SPD.
Eigen::MatrixXd sqrt_spd(const Eigen::MatrixXd& q);

struct AveragingRow {
  double eps = 0.0;
  double error = 0.0;  // |integral (1/g(x/eps)) phi - l_avg integral phi|
};

// Scale-separation table for 1/g against a smooth bump profile on a fixed
// box; the entries decrease as eps shrinks.
std::vector<AveragingRow> averaging_check(const CoefficientField& media,
                                          const std::vector<double>& eps_list,
                                          int resolution = 128);

}  // namespace stefan
