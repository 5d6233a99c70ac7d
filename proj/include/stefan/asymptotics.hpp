#pragma once

#include <Eigen/Core>

#include <vector>

#include "stefan/greens.hpp"
#include "stefan/homogenize.hpp"
#include "stefan/media.hpp"
#include "stefan/vi_solver.hpp"

namespace stefan {

// Explicit self-similar solution of the Hele-Shaw problem with a point source
// for the constant-coefficient operator div(Q D.) and latent heat l_avg:
//   V(x,t) = c_tilde (rho^(2-n) - R(t)^(2-n))_+,  rho = |P^-1 x|,  P = Q^(1/2),
//   R(t) = (n (n-2) c_tilde t / l_avg)^(1/n),
// normalized so V ~ c_star F0(x) at the origin, which forces
// c_tilde = c_star / ((n-2) sigma_{n-1} sqrt(det Q)). The free boundary moves
// by l_avg R' = |D V~|(R), an identity the residual methods below expose.
struct SelfSimilarSolution {
  int dim = 3;
  Eigen::MatrixXd q;
  Eigen::MatrixXd p;      // Q^(1/2)
  Eigen::MatrixXd p_inv;
  double sqrt_det = 1.0;  // sqrt(det Q)
  double l_avg = 1.0;
  double c_star = 1.0;
  double c_tilde = 0.0;

  static SelfSimilarSolution make(const Eigen::MatrixXd& q, double l_avg, double c_star);

  double rho(const double* x) const;
  double radius(double t) const;              // R(t)
  double boundary_time(double rho) const;     // s0 with R(s0) = rho
  double temperature_radial(double rho, double t) const;
  double temperature(const double* x, double t) const;
  // Closed-form time integral int_0^t V(x,s) ds.
  double integral_radial(double rho, double t) const;
  double integral(const double* x, double t) const;

  // l_avg R'(t) - |D V~|(R(t)), relative to l_avg R'(t).
  double velocity_residual(double t) const;
  double velocity_residual_fd(double t) const;
  // |V(x,t) - lambda^((n-2)/n) V(lambda^(1/n) x, lambda t)|.
  double rescale_defect(const double* x, double t, double lambda) const;
};

// Points on the ellipsoid {|P^-1 x| = radius}: Fibonacci lattice for n = 3,
// seeded Gaussian directions otherwise. Returns dim * count coordinates.
std::vector<double> sample_level_ellipsoid(const SelfSimilarSolution& ss, double radius,
                                           int count);

// Symmetric Hausdorff distance between two point clouds (dim * count flat).
double hausdorff_distance(const std::vector<double>& a, const std::vector<double>& b, int dim);

// Decay constant of the exterior source potential: L P = 0 outside the ball
// K of radius r_source, P = 1 on K, P -> 0, and C* = lim P/F. Both P and the
// kernel F are solved on the same truncated boxes (half size and full size)
// so the shell ratio cancels the common truncation; the two box sizes are
// then combined through the screened-capacity model c(R) = C* R / (R - a).
struct NearFieldResult {
  double c_star = 0.0;
  double c_star_small = 0.0;   // shell-median estimate, half box
  double c_star_big = 0.0;     // shell-median estimate, full box
  double a_eff = 0.0;          // fitted screening radius (0 for linear fallback)
  double shell_spread = 0.0;   // relative 10-90 spread of the ratio, full box
  PcgResult potential_info;    // full-box source solve
  PcgResult kernel_info;       // full-box kernel solve
};

NearFieldResult near_field(const CoefficientField& media, double r_source, double r_box,
                           double h_target, double rtol = 1e-10);

// Long-run check of u(.,t)/t -> P on a shell between the source and the
// free boundary; rel_err is the median |(u/t)/P - 1| at the final time.
struct TimeLimitReport {
  double rel_err = 0.0;
  double rel_err_mid = 0.0;  // same at the middle output, to confirm the drift
  double t_final = 0.0;
  double shell_lo = 0.0;
  double shell_hi = 0.0;
};

TimeLimitReport near_field_time_limit(const CoefficientField& media, double r_source,
                                      double r_init, double r_box, double h_target,
                                      double t_final);

// The main convergence experiment: obstacle runs at increasing lambda
// compared against the self-similar limit built from the homogenized data.
struct SweepParams {
  std::vector<double> lambdas = {1.0, 8.0, 64.0};
  std::vector<double> h_targets = {1.0 / 16, 1.0 / 32, 1.0 / 32};
  double r_box = 3.0;
  double r_source = 0.5;
  double r_init = 0.75;
  double t_ref = 1.0;                          // comparison time
  std::vector<double> out_times = {0.5, 1.0, 2.0};
  double dt0 = 5e-3;
  double t_geom = 0.05;                        // uniform steps up to here
  int steps_per_decade = 24;
  int cell_resolution = 64;                    // homogenization lattice
  double nearfield_box = 8.0;
  double nearfield_h = 0.125;
  int ellipsoid_samples = 1024;
  double annulus_lo = 0.5;
  double annulus_hi = 2.0;
  PsorParams psor;
};

struct SweepEntry {
  double lambda = 0.0;
  double h = 0.0;
  std::vector<double> times;
  std::vector<double> sup_u_err;    // per time: sup |u^l - U| on the annulus
  std::vector<double> sup_v_err;    // per time: sup |v^l - V| on the annulus
  std::vector<double> hausdorff;    // per time: d_H(free boundary, level ellipsoid)
  double sing_ratio_raw = 0.0;      // median u^l / (c_star t F0), innermost shell, final t
  double sing_ratio_int = 0.0;      // median u^l / U, same shell
  double shell_lo = 0.0;
  double shell_hi = 0.0;
  double comp_residual = 0.0;
  double monotone_margin = 0.0;
  std::int64_t nested_violations = 0;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  size_t ref_index = 0;  // output index closest to t_ref
  Eigen::MatrixXd q;
  double l_avg = 0.0;
  double c_star = 0.0;
  double c_tilde = 0.0;
  bool sup_u_decreasing = false;    // at the reference time
  bool sup_v_decreasing = false;
  bool hausdorff_decreasing = false;
};

// Pass precomputed homogenization / near-field results to skip recomputing
// them; null means compute here.
SweepResult run_sweep(const CoefficientField& media, const SweepParams& params,
                      const CellProblemResult* cell = nullptr,
                      const NearFieldResult* nf = nullptr);

}  // namespace stefan
