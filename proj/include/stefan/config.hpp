#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

#include "stefan/media.hpp"
#include "stefan/vi_solver.hpp"

namespace stefan {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything an experiment needs, with laptop-scale defaults. Text form is
// ini-style sections of key = value lines; parse_config fills this struct and
// rejects unknown keys.
struct ExperimentConfig {
  // [media]
  std::string media_preset = "layered";  // preset name or "expression"
  int dim = 3;
  std::vector<std::vector<std::string>> a_entries;  // expression media, upper triangle
  std::string g_expr = "1";

  // [domain]
  double r_box = 3.0;
  double r_source = 0.5;
  double r_init = 0.75;

  // [grid]
  double h = 1.0 / 16;

  // [time]
  double t_final = 2.0;
  double dt0 = 5e-3;
  double t_geom = 0.05;
  int steps_per_decade = 24;
  std::vector<double> out_times = {0.5, 1.0, 2.0};

  // [solver]
  PsorParams psor;
  double cg_rtol = 1e-10;

  // [sweep]
  std::vector<double> lambdas = {1.0, 8.0, 64.0};
  std::vector<double> h_targets = {1.0 / 16, 1.0 / 32, 1.0 / 32};
  double t_ref = 1.0;
  double annulus_lo = 0.5;
  double annulus_hi = 2.0;
  int cell_resolution = 64;
  double nearfield_box = 8.0;
  double nearfield_h = 0.125;
  int ellipsoid_samples = 1024;
  double sup_v_max = 0.1;       // final-lambda thresholds for the sweep verdict
  double sup_u_max = 0.1;
  double hausdorff_max = 0.15;
  double ratio_lo = 0.8;
  double ratio_hi = 1.2;

  // [barriers]
  double barrier_t0 = 0.5;      // anchor time (defaults to the first output)
  double quad_box = 4.0;        // quadratic barrier solve box and spacing
  double quad_h = 1.0 / 8;

  // [greens]
  double greens_box = 2.0;
  double greens_h = 1.0 / 32;
  std::vector<double> greens_lambdas = {1.0, 8.0, 64.0};

  // [output]
  std::string out_root = "out";
  std::uint64_t seed = 2026;
};

ExperimentConfig parse_config(const std::string& path);
// Applies "section.key=value" (CLI override syntax).
void apply_override(ExperimentConfig& cfg, const std::string& assignment);
// Static validation: positivity, ordering, resolvability caps. Throws
// ConfigError with an explanation.
void validate_config(const ExperimentConfig& cfg);
// Canonical echo of every effective value, one "section.key = value" per
// line, fixed order; also the determinism anchor.
std::string echo_config(const ExperimentConfig& cfg);
// FNV-1a over the canonical echo, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

CoefficientField make_media(const ExperimentConfig& cfg);

// A-priori radius bound for the positive phase at time t: capacity-type
// estimate from the homogenized matrix, used to verify the box is large
// enough before a long run.
double support_bound_estimate(const Eigen::MatrixXd& q, double l_avg, double r_source,
                              double r_init, double t);

}  // namespace stefan
