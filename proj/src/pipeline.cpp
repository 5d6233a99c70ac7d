#include "stefan/pipeline.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "stefan/asymptotics.hpp"
#include "stefan/barriers.hpp"
#include "stefan/greens.hpp"
#include "stefan/homogenize.hpp"
#include "stefan/io.hpp"
#include "stefan/vi_solver.hpp"

namespace stefan {

namespace {

// Shared state the stages hand forward.
struct Ctx {
  CoefficientField media;
  std::optional<CellProblemResult> cell;
  std::optional<ProblemSetup> setup;
  std::optional<RunResult> run;
  std::optional<NearFieldResult> nf;
  std::optional<SweepResult> sweep;
};

struct StageTimer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double secs() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string fmt6(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff();
}

size_t nearest_index(const std::vector<double>& ts, double t) {
  size_t best = 0;
  double d = 1e300;
  for (size_t i = 0; i < ts.size(); ++i) {
    double di = std::abs(ts[i] - t);
    if (di < d) {
      d = di;
      best = i;
    }
  }
  return best;
}

StageResult stage_homogenize(const ExperimentConfig& cfg, Ctx& ctx, const std::string& dir) {
  StageResult st;
  st.name = "homogenize";
  st.ran = true;
  StageTimer timer;

  ctx.cell = solve_cell_problems(ctx.media, cfg.cell_resolution, 1e-12);
  const CellProblemResult& cp = *ctx.cell;

  {
    CsvWriter csv(dir + "/homogenized_tensor.csv", {"i", "j", "q", "q_raw", "voigt", "reuss"});
    for (int i = 0; i < cfg.dim; ++i)
      for (int j = 0; j < cfg.dim; ++j)
        csv.row({double(i + 1), double(j + 1), cp.q(i, j), cp.q_raw(i, j), cp.voigt(i, j),
                 cp.reuss(i, j)});
    st.files.push_back("homogenized_tensor.csv");
  }

  std::vector<AveragingRow> avg =
      averaging_check(ctx.media, {1.0, 0.5, 0.25}, cfg.dim == 3 ? 96 : 24);
  {
    CsvWriter csv(dir + "/averaging.csv", {"eps", "error"});
    for (const AveragingRow& r : avg) csv.row({r.eps, r.error});
    st.files.push_back("averaging.csv");
  }

  double tol = 1e-8 * cp.voigt.norm();
  bool sandwich = min_eigenvalue(cp.voigt - cp.q) >= -tol &&
                  min_eigenvalue(cp.q - cp.reuss) >= -tol;
  bool cg_ok = true;
  for (double r : cp.cg_residuals) cg_ok = cg_ok && r <= 1e-9;
  bool avg_ok = true;
  for (size_t i = 0; i + 1 < avg.size(); ++i) avg_ok = avg_ok && avg[i + 1].error < avg[i].error;
  bool known_ok = true;
  if (ctx.media.known) {
    // A reference may know only part of the pair (q empty / l_avg negative).
    if (ctx.media.known->q.size() > 0)
      known_ok = (cp.q - ctx.media.known->q).cwiseAbs().maxCoeff() <= 1e-3;
    if (ctx.media.known->l_avg > 0)
      known_ok = known_ok && std::abs(cp.l_avg - ctx.media.known->l_avg) <= 1e-6;
  }
  st.pass = sandwich && cg_ok && avg_ok && known_ok && cp.asym_residual <= 1e-8 &&
            cp.l_avg > 0;

  std::string diag;
  for (int i = 0; i < cfg.dim; ++i) diag += (i ? ", " : "") + fmt6(cp.q(i, i));
  st.notes = "q diag = [" + diag + "], l_avg = " + fmt6(cp.l_avg) +
             ", asym = " + fmt6(cp.asym_residual) +
             (ctx.media.known ? std::string(", reference matched: ") + (known_ok ? "yes" : "NO")
                              : std::string());
  st.seconds = timer.secs();
  return st;
}

StageResult stage_greens(const ExperimentConfig& cfg, Ctx& ctx, const std::string& dir) {
  StageResult st;
  st.name = "greens";
  st.ran = true;
  StageTimer timer;

  Grid grid = Grid::make(cfg.dim, cfg.greens_box, cfg.greens_h);
  GreensTable ref = solve_reference_kernel(ctx.cell->q, grid, FarField::kZero, cfg.cg_rtol);
  const double lo = 0.25 * cfg.greens_box;
  const double hi = 0.75 * cfg.greens_box;

  std::vector<double> sups;
  bool converged = ref.solve_info.converged;
  std::optional<GreensTable> last;
  {
    CsvWriter csv(dir + "/greens_convergence.csv",
                  {"lambda", "sup_diff", "iterations", "rel_residual"});
    for (double lam : cfg.greens_lambdas) {
      GreensTable tab = solve_greens_numeric(ctx.media, cfg.greens_box, cfg.greens_h, lam,
                                             FarField::kZero, nullptr, cfg.cg_rtol);
      double sup = annulus_sup_diff(grid, tab.values, ref.values, lo, hi);
      sups.push_back(sup);
      converged = converged && tab.solve_info.converged;
      csv.row({lam, sup, double(tab.solve_info.iterations), tab.solve_info.rel_residual});
      last.emplace(std::move(tab));
    }
    st.files.push_back("greens_convergence.csv");
  }
  if (last) {
    write_radial_csv(dir + "/greens_profile.csv", grid, last->values, 2 * grid.h, hi, 48);
    st.files.push_back("greens_profile.csv");
  }

  double delta = delta_test(ExplicitKernel::make(ctx.cell->q), cfg.greens_box, cfg.greens_h);

  bool nonincreasing = true;
  for (size_t i = 0; i + 1 < sups.size(); ++i)
    nonincreasing = nonincreasing && sups[i + 1] <= sups[i] * (1 + 1e-12);
  bool shrank = sups.size() < 2 || sups.back() < sups.front();
  st.pass = converged && nonincreasing && shrank && std::abs(delta - 1.0) <= 0.02;

  std::string sup_list;
  for (size_t i = 0; i < sups.size(); ++i) sup_list += (i ? ", " : "") + fmt6(sups[i]);
  st.notes = "sup diffs vs homogenized kernel = [" + sup_list + "], delta quadrature = " +
             fmt6(delta);
  st.seconds = timer.secs();
  return st;
}

StageResult stage_solve(const ExperimentConfig& cfg, Ctx& ctx, const std::string& dir) {
  StageResult st;
  st.name = "solve";
  st.ran = true;
  StageTimer timer;

  double bound = support_bound_estimate(ctx.cell->q, ctx.cell->l_avg, cfg.r_source,
                                        cfg.r_init, cfg.t_final);
  if (bound + 2 * cfg.h >= cfg.r_box)
    throw ConfigError("box too small for the planned run: estimated reach " + fmt6(bound) +
                      " vs r_box " + fmt6(cfg.r_box));

  ctx.setup = make_problem(ctx.media, cfg.r_box, cfg.h, cfg.r_source, cfg.r_init, 1.0, cfg.psor);
  std::vector<double> steps = time_grid_with_outputs(cfg.t_geom, cfg.t_final, cfg.dt0,
                                                     cfg.steps_per_decade, cfg.out_times);
  ctx.run = run_obstacle(*ctx.setup, steps, cfg.out_times);
  const RunResult& run = *ctx.run;
  const Grid& grid = ctx.setup->grid;

  {
    CsvWriter csv(dir + "/growth.csv",
                  {"t", "dt", "sweeps", "comp_residual", "min_u", "monotone_margin",
                   "nested_violations", "min_radius", "max_radius", "n_positive"});
    for (const StepDiagnostics& d : run.steps)
      csv.row({d.t, d.dt, double(d.sweeps), d.comp_residual, d.min_u, d.monotone_margin,
               double(d.nested_violations), d.min_radius, d.max_radius, double(d.n_positive)});
    st.files.push_back("growth.csv");
  }
  for (size_t k = 0; k < run.v.size(); ++k) {
    std::string name = "radial_v_" + std::to_string(k + 1) + ".csv";
    write_radial_csv(dir + "/" + name, grid, run.v[k], 0.0, 0.95 * cfg.r_box, 64);
    st.files.push_back(name);
  }
  write_points_csv(dir + "/free_boundary_final.csv", run.fb.back().points, cfg.dim);
  st.files.push_back("free_boundary_final.csv");
  write_slice_csv(dir + "/slice_u_final.csv", grid, run.u.back(), cfg.dim - 1, 0.0);
  st.files.push_back("slice_u_final.csv");
  write_field(dir + "/u_final.field", grid, run.u.back());
  st.files.push_back("u_final.field");

  double tol_abs = cfg.psor.rtol * ctx.setup->f_scale;
  double mono_floor = -1e-8 * std::max(1.0, ctx.setup->bc_scale * cfg.t_final);
  st.pass = run.worst_comp_residual <= tol_abs * 1.01 &&
            run.worst_monotone_margin >= mono_floor && run.nested_violations == 0;

  const FreeBoundarySnapshot& fb = run.fb.back();
  st.notes = "final boundary radius in [" + fmt6(fb.min_radius) + ", " + fmt6(fb.max_radius) +
             "], worst complementarity " + fmt6(run.worst_comp_residual) + " (target " +
             fmt6(tol_abs) + "), steps " + std::to_string(run.steps.size());
  st.seconds = timer.secs();
  return st;
}

StageResult stage_barriers(const ExperimentConfig& cfg, Ctx& ctx, const std::string& dir) {
  StageResult st;
  st.name = "barriers";
  st.ran = true;
  StageTimer timer;

  // Kernel table on the run grid; the homogenized far field keeps the box
  // truncation from crushing the annulus constants.
  GreensTable tab = solve_greens_numeric(ctx.media, cfg.r_box, cfg.h, 1.0,
                                         FarField::kHomogenizedLift, &ctx.cell->q, cfg.cg_rtol);
  // The upper barrier works at super-t^(1/n) radii, the lower one near the
  // source; each gets the kernel constants measured on its own annulus.
  BarrierKernel kernel = BarrierKernel::from_table(tab, 0.5 * cfg.r_init, 0.85 * cfg.r_box);
  BarrierKernel kernel_sub = BarrierKernel::from_table(tab, 2.0 * cfg.h, 0.85 * cfg.r_box);
  QuadraticBarrierField hf = build_quadratic_barrier(ctx.media, cfg.quad_box, cfg.quad_h);
  MediaBounds mb = MediaBounds::from(ctx.media);

  size_t k0 = nearest_index(ctx.run->out_times, cfg.barrier_t0);
  double t0 = ctx.run->out_times[k0];
  SuperBarrier hi = choose_supersolution(kernel, *ctx.setup, ctx.run->v[k0], t0, mb);
  SubBarrier lo = choose_subsolution(kernel_sub, hf, *ctx.setup, ctx.run->v[k0], t0, mb);
  EnvelopeReport env = envelope_check(*ctx.setup, *ctx.run, kernel, hi, kernel_sub, hf, lo, 0.05);

  {
    CsvWriter csv(dir + "/barriers.csv",
                  {"super_c1", "super_c2", "fb_headroom", "super_domination",
                   "super_source_margin", "sub_c1", "sub_c2", "sub_c3", "sub_feasible_lo",
                   "sub_feasible_hi", "sub_c_tilde", "sub_domination", "sub_velocity_margin",
                   "sub_edge_margin", "sub_interior_margin", "sub_audit_t_hi", "slope_max",
                   "slope_min", "upper_violations", "lower_violations", "growth_ratio_max",
                   "growth_ratio_min", "quad_consistency", "kernel_c_low", "kernel_c_up",
                   "kernel_m_grad", "kernel_sub_c_low", "kernel_sub_c_up",
                   "kernel_sub_m_grad_low"});
    csv.row({hi.c1, hi.c2, hi.fb_headroom, hi.domination_margin, hi.source_margin, lo.c1,
             lo.c2, lo.c3, lo.feasible_lo, lo.feasible_hi, lo.c_tilde, lo.domination_margin,
             lo.velocity_margin, lo.edge_margin, lo.interior_margin, lo.audit_t_hi,
             env.slope_max, env.slope_min, double(env.upper_violations),
             double(env.lower_violations), env.growth_ratio_max, env.growth_ratio_min,
             hf.consistency, kernel.constants.c_low, kernel.constants.c_up,
             kernel.constants.m_grad, kernel_sub.constants.c_low, kernel_sub.constants.c_up,
             kernel_sub.constants.m_grad_low});
    st.files.push_back("barriers.csv");
  }

  st.pass = hi.admissible && lo.admissible && env.upper_violations == 0 &&
            env.lower_violations == 0;
  st.notes = std::string("upper barrier ") + (hi.admissible ? "ok" : "NOT admissible") +
             ", lower barrier " + (lo.admissible ? "ok" : "NOT admissible") +
             ", envelope violations " + std::to_string(env.upper_violations) + "/" +
             std::to_string(env.lower_violations) + ", radius slopes " + fmt6(env.slope_min) +
             ".." + fmt6(env.slope_max) + " (target " + fmt6(1.0 / cfg.dim) + ")";
  st.seconds = timer.secs();
  return st;
}

StageResult stage_nearfield(const ExperimentConfig& cfg, Ctx& ctx, const std::string& dir) {
  StageResult st;
  st.name = "nearfield";
  st.ran = true;
  StageTimer timer;

  ctx.nf = near_field(ctx.media, cfg.r_source, cfg.nearfield_box, cfg.nearfield_h, cfg.cg_rtol);
  const NearFieldResult& nf = *ctx.nf;

  {
    CsvWriter csv(dir + "/nearfield.csv",
                  {"c_star", "c_star_small", "c_star_big", "a_eff", "shell_spread",
                   "potential_iterations", "kernel_iterations"});
    csv.row({nf.c_star, nf.c_star_small, nf.c_star_big, nf.a_eff, nf.shell_spread,
             double(nf.potential_info.iterations), double(nf.kernel_info.iterations)});
    st.files.push_back("nearfield.csv");
  }

  st.pass = nf.c_star > 0 && nf.shell_spread < 0.25 && nf.potential_info.converged &&
            nf.kernel_info.converged;
  st.notes = "c_star = " + fmt6(nf.c_star) + " (boxes gave " + fmt6(nf.c_star_small) + " / " +
             fmt6(nf.c_star_big) + ", screening radius " + fmt6(nf.a_eff) + ", shell spread " +
             fmt6(nf.shell_spread) + ")";
  st.seconds = timer.secs();
  return st;
}

StageResult stage_selfsim(const ExperimentConfig& cfg, Ctx& ctx, const std::string& dir) {
  StageResult st;
  st.name = "selfsim";
  st.ran = true;
  StageTimer timer;

  SelfSimilarSolution ss =
      SelfSimilarSolution::make(ctx.cell->q, ctx.cell->l_avg, ctx.nf->c_star);

  double worst = 0.0, worst_fd = 0.0;
  {
    CsvWriter csv(dir + "/selfsim.csv",
                  {"t", "radius", "velocity_residual", "velocity_residual_fd"});
    for (double t : cfg.out_times) {
      double vr = std::abs(ss.velocity_residual(t));
      double fd = std::abs(ss.velocity_residual_fd(t));
      worst = std::max(worst, vr);
      worst_fd = std::max(worst_fd, fd);
      csv.row({t, ss.radius(t), vr, fd});
    }
    st.files.push_back("selfsim.csv");
  }

  // Scaling invariance probed on deterministic ellipsoid points.
  double defect = 0.0;
  for (double t : cfg.out_times) {
    double big_r = ss.radius(t);
    for (double frac : {0.4, 0.9}) {
      std::vector<double> pts = sample_level_ellipsoid(ss, frac * big_r, 16);
      const size_t d = static_cast<size_t>(cfg.dim);
      for (double lam : {2.0, 16.0})
        for (size_t p = 0; p + d <= pts.size(); p += d)
          defect = std::max(defect, ss.rescale_defect(&pts[p], t, lam));
    }
  }

  {
    double t_ref = cfg.t_ref;
    double big_r = ss.radius(t_ref);
    CsvWriter csv(dir + "/selfsim_profile.csv", {"rho", "temperature", "integral"});
    for (int i = 0; i < 64; ++i) {
      double rho = (0.02 + (1.2 - 0.02) * i / 63.0) * big_r;
      csv.row({rho, ss.temperature_radial(rho, t_ref), ss.integral_radial(rho, t_ref)});
    }
    st.files.push_back("selfsim_profile.csv");
  }

  st.pass = worst <= 1e-10 && worst_fd <= 1e-6 && defect <= 1e-10;
  st.notes = "c_tilde = " + fmt6(ss.c_tilde) + ", R(" + fmt6(cfg.t_final) + ") = " +
             fmt6(ss.radius(cfg.t_final)) + ", velocity residual " + fmt6(worst) + " (fd " +
             fmt6(worst_fd) + "), rescale defect " + fmt6(defect);
  st.seconds = timer.secs();
  return st;
}

StageResult stage_sweep(const ExperimentConfig& cfg, Ctx& ctx, const std::string& dir) {
  StageResult st;
  st.name = "sweep";
  st.ran = true;
  StageTimer timer;

  SelfSimilarSolution ss =
      SelfSimilarSolution::make(ctx.cell->q, ctx.cell->l_avg, ctx.nf->c_star);
  double emax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(ctx.cell->q)
                    .eigenvalues()
                    .maxCoeff();
  double h_max = *std::max_element(cfg.h_targets.begin(), cfg.h_targets.end());
  double t_final = cfg.out_times.back();
  double need = 1.05 * std::max(std::sqrt(emax) * ss.radius(t_final), cfg.r_init) + 3 * h_max;
  if (need >= cfg.r_box - h_max)
    throw ConfigError("sweep box too small: expected reach " + fmt6(need) + " vs r_box " +
                      fmt6(cfg.r_box));

  SweepParams params;
  params.lambdas = cfg.lambdas;
  params.h_targets = cfg.h_targets;
  params.r_box = cfg.r_box;
  params.r_source = cfg.r_source;
  params.r_init = cfg.r_init;
  params.t_ref = cfg.t_ref;
  params.out_times = cfg.out_times;
  params.dt0 = cfg.dt0;
  params.t_geom = cfg.t_geom;
  params.steps_per_decade = cfg.steps_per_decade;
  params.cell_resolution = cfg.cell_resolution;
  params.nearfield_box = cfg.nearfield_box;
  params.nearfield_h = cfg.nearfield_h;
  params.ellipsoid_samples = cfg.ellipsoid_samples;
  params.annulus_lo = cfg.annulus_lo;
  params.annulus_hi = cfg.annulus_hi;
  params.psor = cfg.psor;

  ctx.sweep = run_sweep(ctx.media, params, &*ctx.cell, &*ctx.nf);
  const SweepResult& sw = *ctx.sweep;

  {
    CsvWriter csv(dir + "/sweep.csv",
                  {"lambda", "h", "t", "sup_u_err", "sup_v_err", "hausdorff"});
    for (const SweepEntry& e : sw.entries)
      for (size_t k = 0; k < e.times.size(); ++k)
        csv.row({e.lambda, e.h, e.times[k], e.sup_u_err[k], e.sup_v_err[k], e.hausdorff[k]});
    st.files.push_back("sweep.csv");
  }
  {
    CsvWriter csv(dir + "/sweep_summary.csv",
                  {"lambda", "h", "sing_ratio_raw", "sing_ratio_int", "shell_lo", "shell_hi",
                   "comp_residual", "monotone_margin", "nested_violations"});
    for (const SweepEntry& e : sw.entries)
      csv.row({e.lambda, e.h, e.sing_ratio_raw, e.sing_ratio_int, e.shell_lo, e.shell_hi,
               e.comp_residual, e.monotone_margin, double(e.nested_violations)});
    st.files.push_back("sweep_summary.csv");
  }

  const SweepEntry& fin = sw.entries.back();
  size_t r = sw.ref_index;
  bool thresholds = fin.sup_v_err[r] <= cfg.sup_v_max && fin.sup_u_err[r] <= cfg.sup_u_max &&
                    fin.hausdorff[r] <= cfg.hausdorff_max;
  bool ratio_ok = fin.sing_ratio_raw >= cfg.ratio_lo && fin.sing_ratio_raw <= cfg.ratio_hi;
  st.pass = sw.sup_u_decreasing && sw.sup_v_decreasing && sw.hausdorff_decreasing &&
            thresholds && ratio_ok;

  st.notes = "at t = " + fmt6(fin.times[r]) + ": sup_v " + fmt6(fin.sup_v_err[r]) + ", sup_u " +
             fmt6(fin.sup_u_err[r]) + ", hausdorff " + fmt6(fin.hausdorff[r]) +
             ", singularity ratio " + fmt6(fin.sing_ratio_raw) + " (integral form " +
             fmt6(fin.sing_ratio_int) + "), decreasing " +
             (sw.sup_u_decreasing && sw.sup_v_decreasing && sw.hausdorff_decreasing ? "yes"
                                                                                    : "NO");
  st.seconds = timer.secs();
  return st;
}

StageResult stage_report(const ExperimentConfig& cfg, Ctx& ctx, const std::string& dir,
                         const std::vector<StageResult>& done) {
  StageResult st;
  st.name = "report";
  st.ran = true;
  StageTimer timer;

  std::ofstream md(dir + "/report.md");
  if (!md) throw std::runtime_error("cannot write report.md");

  md << "# Obstacle-problem laboratory report\n\n";
  md << "Configuration hash: `" << config_hash(cfg) << "`\n\n";
  md << "Medium: **" << ctx.media.name << "** (dim " << cfg.dim << "), box radius "
     << fmt6(cfg.r_box) << ", source radius " << fmt6(cfg.r_source) << ", grid spacing "
     << fmt6(cfg.h) << ".\n\n";

  md << "## Stage results\n\n";
  md << "| stage | verdict | notes |\n|---|---|---|\n";
  bool all = true;
  for (const StageResult& s : done) {
    md << "| " << s.name << " | " << (s.pass ? "pass" : "FAIL") << " | " << s.notes << " |\n";
    all = all && s.pass;
  }
  md << "\n";

  if (ctx.cell) {
    md << "## Homogenized operator\n\n";
    md << "Effective tensor (row-major):\n\n```\n";
    for (int i = 0; i < cfg.dim; ++i) {
      for (int j = 0; j < cfg.dim; ++j) md << (j ? "  " : "") << fmt6(ctx.cell->q(i, j));
      md << "\n";
    }
    md << "```\n\nMean inverse mobility: " << fmt6(ctx.cell->l_avg) << "\n\n";
  }
  if (ctx.nf) {
    md << "## Source decay constant\n\n";
    md << "c_star = " << fmt6(ctx.nf->c_star) << " with screening radius "
       << fmt6(ctx.nf->a_eff) << " and shell spread " << fmt6(ctx.nf->shell_spread) << ".\n\n";
  }
  if (ctx.sweep) {
    const SweepResult& sw = *ctx.sweep;
    md << "## Scaling sweep\n\n";
    md << "Limit solution: c_tilde = " << fmt6(sw.c_tilde) << ".\n\n";
    md << "| lambda | h | sup_v at t_ref | sup_u at t_ref | hausdorff | singularity ratio |\n";
    md << "|---|---|---|---|---|---|\n";
    for (const SweepEntry& e : sw.entries)
      md << "| " << fmt6(e.lambda) << " | " << fmt6(e.h) << " | "
         << fmt6(e.sup_v_err[sw.ref_index]) << " | " << fmt6(e.sup_u_err[sw.ref_index])
         << " | " << fmt6(e.hausdorff[sw.ref_index]) << " | " << fmt6(e.sing_ratio_raw)
         << " |\n";
    md << "\n";
  }

  md << "## Files\n\n";
  for (const StageResult& s : done)
    for (const std::string& f : s.files) md << "- `" << f << "` (" << s.name << ")\n";
  md << "- `report.md` (report)\n- `manifest.json` (report)\n";
  md << "\nOverall: " << (all ? "**all stages passed**" : "**FAILURES PRESENT**") << "\n";
  md.close();

  st.files.push_back("report.md");
  st.pass = all;
  st.notes = all ? "all prior stages passed" : "at least one stage failed";
  st.seconds = timer.secs();
  return st;
}

const std::map<std::string, std::vector<std::string>>& stage_deps() {
  static const std::map<std::string, std::vector<std::string>> deps = {
      {"homogenize", {}},
      {"greens", {"homogenize"}},
      {"solve", {"homogenize"}},
      {"barriers", {"homogenize", "solve"}},
      {"nearfield", {}},
      {"selfsim", {"homogenize", "nearfield"}},
      {"sweep", {"homogenize", "nearfield"}},
      {"report", {"homogenize", "greens", "solve", "barriers", "nearfield", "selfsim", "sweep"}},
  };
  return deps;
}

}  // namespace

const std::vector<std::string>& pipeline_stage_names() {
  static const std::vector<std::string> names = {"homogenize", "greens", "solve", "barriers",
                                                 "nearfield", "selfsim", "sweep", "report"};
  return names;
}

RunManifest run_pipeline(const ExperimentConfig& cfg, const std::vector<std::string>& requested,
                         const std::string& out_dir) {
  validate_config(cfg);

  std::set<std::string> active;
  std::vector<std::string> frontier = requested;
  while (!frontier.empty()) {
    std::string name = frontier.back();
    frontier.pop_back();
    auto it = stage_deps().find(name);
    if (it == stage_deps().end()) throw ConfigError("unknown pipeline stage: " + name);
    if (!active.insert(name).second) continue;
    for (const std::string& d : it->second) frontier.push_back(d);
  }
  if (active.empty()) throw ConfigError("no pipeline stages requested");

  ensure_dir(out_dir);
  {
    std::ofstream echo(out_dir + "/config_echo.txt");
    if (!echo) throw std::runtime_error("cannot write to " + out_dir);
    echo << echo_config(cfg);
  }

  Ctx ctx{make_media(cfg), {}, {}, {}, {}, {}};
  RunManifest man;
  man.config_hash = config_hash(cfg);
  man.out_dir = out_dir;

  for (const std::string& name : pipeline_stage_names()) {
    if (!active.count(name)) continue;
    StageResult st;
    if (name == "homogenize")
      st = stage_homogenize(cfg, ctx, out_dir);
    else if (name == "greens")
      st = stage_greens(cfg, ctx, out_dir);
    else if (name == "solve")
      st = stage_solve(cfg, ctx, out_dir);
    else if (name == "barriers")
      st = stage_barriers(cfg, ctx, out_dir);
    else if (name == "nearfield")
      st = stage_nearfield(cfg, ctx, out_dir);
    else if (name == "selfsim")
      st = stage_selfsim(cfg, ctx, out_dir);
    else if (name == "sweep")
      st = stage_sweep(cfg, ctx, out_dir);
    else
      st = stage_report(cfg, ctx, out_dir, man.stages);
    man.stages.push_back(std::move(st));
  }

  man.all_pass = true;
  for (const StageResult& s : man.stages) man.all_pass = man.all_pass && s.pass;

  nlohmann::json j;
  j["config_hash"] = man.config_hash;
  j["out_dir"] = man.out_dir;
  j["all_pass"] = man.all_pass;
  j["media"] = ctx.media.name;
  nlohmann::json stages = nlohmann::json::array();
  for (const StageResult& s : man.stages) {
    nlohmann::json e;
    e["name"] = s.name;
    e["ran"] = s.ran;
    e["pass"] = s.pass;
    e["seconds"] = s.seconds;  // wall clock lives here, never in the CSVs
    e["notes"] = s.notes;
    e["files"] = s.files;
    stages.push_back(std::move(e));
  }
  j["stages"] = std::move(stages);
  std::ofstream mf(out_dir + "/manifest.json");
  if (!mf) throw std::runtime_error("cannot write manifest.json");
  mf << j.dump(2) << "\n";

  return man;
}

}  // namespace stefan
