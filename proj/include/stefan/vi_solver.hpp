#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stefan/grid.hpp"
#include "stefan/media.hpp"

namespace stefan {

struct PsorParams {
  double omega = 1.7;
  double rtol = 1e-9;          // complementarity target relative to ||f||_inf
  int max_sweep_scale = 50;    // sweep cap = scale * cells_per_axis
  int check_every = 4;         // residual evaluation cadence
};

// Implicit-Euler obstacle problem for the time-integrated temperature. At
// scale lambda the unknown obeys
//   c_time (u - u_prev)/dt - L u - f >= 0,  u >= 0,  complementarity,
// with u = bc_scale * t on the shrunk source ball and u = 0 on the outer
// layer; c_time = lambda^((2-n)/n), bc_scale = lambda^((n-2)/n), coefficients
// sampled at lambda^(1/n) x.
struct ProblemSetup {
  Grid grid;
  DomainMasks masks;
  StencilOperator op;
  Field f;
  Field v0;                 // rescaled initial temperature (diagnostics)
  double lambda = 1.0;
  double c_time = 1.0;
  double bc_scale = 1.0;
  double r_source = 0.0;    // rescaled source ball radius
  double r_init = 0.0;      // rescaled initial positive-phase radius
  double f_scale = 1.0;     // ||f||_inf over free cells
  PsorParams psor;
  std::string media_name;
};

// Initial temperature profile: 1 on the source ball, decaying C1 ramp to 0 at
// r_init, with nonvanishing slope at the outer edge.
double initial_temperature(double radius, double r_source, double r_init);

ProblemSetup make_problem(const CoefficientField& media, double r_box, double h_target,
                          double r_source, double r_init, double lambda = 1.0,
                          PsorParams psor = {});

struct FreeBoundarySnapshot {
  double t = 0.0;
  std::vector<double> points;  // dim * count cell centers on the phase boundary
  std::int64_t count = 0;
  std::int64_t n_positive = 0;
  double min_radius = 0.0;
  double max_radius = 0.0;
};

struct StepDiagnostics {
  double t = 0.0;
  double dt = 0.0;
  int sweeps = 0;
  double comp_residual = 0.0;       // max |min(u, step residual)| over free cells
  double min_u = 0.0;
  double monotone_margin = 0.0;     // min(u_new - u_prev); >= 0 up to solver tol
  std::int64_t nested_violations = 0;
  double min_radius = 0.0;
  double max_radius = 0.0;
  std::int64_t n_positive = 0;
};

struct RunResult {
  std::vector<double> out_times;
  std::vector<Field> u;
  std::vector<Field> v;             // backward difference at the output step
  std::vector<FreeBoundarySnapshot> fb;
  std::vector<StepDiagnostics> steps;
  double worst_comp_residual = 0.0;
  double worst_monotone_margin = 0.0;
  std::int64_t nested_violations = 0;
};

inline constexpr double kFreeBoundaryThreshold = 1e-10;

std::vector<double> time_grid_uniform(double t_final, double dt);
// Uniform spacing dt0 up to t0, then geometric with the given number of steps
// per decade until t_final.
std::vector<double> time_grid_geometric(double t0, double t_final, double dt0, int per_decade);
// Same, with the output times spliced into the grid so run_obstacle can
// capture them exactly.
std::vector<double> time_grid_with_outputs(double t0, double t_final, double dt0,
                                           int per_decade, const std::vector<double>& outs);

// Steps through step_times (strictly increasing, starting after 0) capturing
// fields at out_times (a subset). Throws if the positive phase reaches the
// outer layer.
RunResult run_obstacle(const ProblemSetup& setup, const std::vector<double>& step_times,
                       const std::vector<double>& out_times);

FreeBoundarySnapshot extract_free_boundary(const Grid& grid, const DomainMasks& masks,
                                           const Field& u, double t,
                                           double threshold = kFreeBoundaryThreshold);

struct ComparisonReport {
  double max_violation_u = 0.0;   // max over outputs of max(u_low - u_high)
  double max_violation_v = 0.0;
  bool pass = false;
};

// Runs two setups with ordered sources (f_low <= f_high cellwise, same grid
// and operator bounds) on a common time grid and checks order preservation.
ComparisonReport comparison_test(const ProblemSetup& low, const ProblemSetup& high,
                                 const std::vector<double>& step_times,
                                 const std::vector<double>& out_times, double slack = 1e-10);

struct WeakMonotonicityReport {
  double c1 = 0.0;  // sup of v0 / v(.,t) over the initial positive phase
  double c2 = 0.0;  // sup of u(.,t) / (t v(.,t)) over the positive phase
  bool finite = false;
};

// Empirical constants from the pointwise bounds v0 <= C v(.,t) and
// u(.,t) <= C t v(.,t); evaluated on one output snapshot.
WeakMonotonicityReport weak_monotonicity_check(const ProblemSetup& setup, const RunResult& run,
                                               size_t snap_index, double v_floor = 1e-8);

}  // namespace stefan
