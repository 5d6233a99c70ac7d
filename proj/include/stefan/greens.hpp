#pragma once

#include <optional>

#include <Eigen/Dense>

#include "stefan/grid.hpp"
#include "stefan/media.hpp"
#include "stefan/pcg.hpp"

namespace stefan {

// Surface area of the unit (n-1)-sphere.
double sphere_area(int dim);

// Closed-form fundamental solution of the constant-coefficient operator
// div(Q D .): F0(x) = kappa_n (x' Q^-1 x)^((2-n)/2) / sqrt(det Q) with
// kappa_n = 1 / ((n-2) sigma_{n-1}), so -div(Q D F0) = delta. Requires n >= 3.
struct ExplicitKernel {
  int dim = 3;
  Eigen::MatrixXd q;
  Eigen::MatrixXd q_inv;
  double sqrt_det = 1.0;
  double kappa = 0.0;

  static ExplicitKernel make(const Eigen::MatrixXd& q);
  double value(const double* x) const;
  void gradient(const double* x, double* g) const;
};

enum class FarField {
  kZero,             // homogeneous Dirichlet box truncation
  kHomogenizedLift,  // Dirichlet data F0(x) of the homogenized operator
  kExactKernel       // Dirichlet data F0 of the operator itself (constant media)
};

struct GreensTable {
  Grid grid;
  Field values;
  double lambda = 1.0;
  PcgResult solve_info;
};

// Solves -L G = delta_h (unit mass lumped into the origin cell) on the box
// with the requested far-field closure. Coefficients are sampled at
// lambda^(1/n) x, so the result approximates the rescaled kernel G^lambda.
GreensTable solve_greens_numeric(const CoefficientField& media, double r_box, double h_target,
                                 double lambda = 1.0, FarField far_field = FarField::kZero,
                                 const Eigen::MatrixXd* q_lift = nullptr, double rtol = 1e-10,
                                 int max_iter = 100000);

// Reference table for the homogenized operator on an existing grid: same
// discrete delta, same boxing, constant coefficients Q.
GreensTable solve_reference_kernel(const Eigen::MatrixXd& q, const Grid& grid,
                                   FarField far_field = FarField::kZero, double rtol = 1e-10,
                                   int max_iter = 100000);

// lambda^((n-2)/n) G(lambda^(1/n) x) resampled from a unit-scale table.
Field resample_rescaled(const GreensTable& base, const Grid& target, double lambda);

// Quadrature of <F0, -L0 phi> against a Gaussian bump with analytic L0 phi;
// the result approximates phi(0) = 1 and pins the kernel normalization.
double delta_test(const ExplicitKernel& kernel, double r_box, double h);

struct KernelBounds {
  double c_upper = 0.0;        // max over the annulus of G |x|^(n-2)
  double c_lower = 0.0;        // min over the annulus of G |x|^(n-2)
  double c_bound = 0.0;        // max(c_upper, 1/c_lower) when G > 0
  double m_gradient = 0.0;     // max of |DG| |x|^(n-1), central differences
  double m_gradient_low = 0.0; // min of |DG| |x|^(n-1) on the same cells
  bool positive = true;
  std::int64_t ncells = 0;
};

KernelBounds kernel_bounds(const GreensTable& table, double r_lo, double r_hi);

// sup over annulus cells of |a - b| for same-grid value arrays.
double annulus_sup_diff(const Grid& grid, const Field& a, const Field& b,
                        double r_lo, double r_hi);

// max over annulus cells of |G/F0 - 1|.
double annulus_max_rel_err(const GreensTable& table, const ExplicitKernel& kernel,
                           double r_lo, double r_hi);

}  // namespace stefan
