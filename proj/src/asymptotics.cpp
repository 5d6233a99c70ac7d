#include "stefan/asymptotics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "stefan/homogenize.hpp"
#include "stefan/pcg.hpp"
#include "stefan/rng.hpp"

namespace stefan {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    double lo = *std::max_element(v.begin(), v.begin() + mid);
    m = 0.5 * (m + lo);
  }
  return m;
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  size_t k = static_cast<size_t>(p * (v.size() - 1));
  std::nth_element(v.begin(), v.begin() + k, v.end());
  return v[k];
}

}  // namespace

SelfSimilarSolution SelfSimilarSolution::make(const Eigen::MatrixXd& q, double l_avg,
                                              double c_star) {
  int n = static_cast<int>(q.rows());
  if (n < 3) throw std::invalid_argument("self-similar solution requires dim >= 3");
  if (!(l_avg > 0) || !(c_star > 0))
    throw std::invalid_argument("self-similar solution needs positive l_avg and c_star");
  SelfSimilarSolution ss;
  ss.dim = n;
  ss.q = q;
  ss.p = sqrt_spd(q);
  ss.p_inv = ss.p.inverse();
  ss.sqrt_det = std::sqrt(q.determinant());
  ss.l_avg = l_avg;
  ss.c_star = c_star;
  ss.c_tilde = c_star / ((n - 2.0) * sphere_area(n) * ss.sqrt_det);
  return ss;
}

double SelfSimilarSolution::rho(const double* x) const {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) {
    double yi = 0.0;
    for (int j = 0; j < dim; ++j) yi += p_inv(i, j) * x[j];
    s += yi * yi;
  }
  return std::sqrt(s);
}

double SelfSimilarSolution::radius(double t) const {
  if (!(t > 0)) return 0.0;
  return std::pow(dim * (dim - 2.0) * c_tilde * t / l_avg, 1.0 / dim);
}

double SelfSimilarSolution::boundary_time(double rho) const {
  return l_avg * std::pow(rho, dim) / (dim * (dim - 2.0) * c_tilde);
}

double SelfSimilarSolution::temperature_radial(double rho, double t) const {
  if (!(t > 0) || !(rho > 0)) return 0.0;
  double r = radius(t);
  if (rho >= r) return 0.0;
  int n = dim;
  return c_tilde * (std::pow(rho, 2.0 - n) - std::pow(r, 2.0 - n));
}

double SelfSimilarSolution::temperature(const double* x, double t) const {
  return temperature_radial(rho(x), t);
}

double SelfSimilarSolution::integral_radial(double rho, double t) const {
  if (!(t > 0) || !(rho > 0)) return 0.0;
  double s0 = boundary_time(rho);
  if (t <= s0) return 0.0;
  int n = dim;
  // int_{s0}^t c~ (rho^(2-n) - R(s)^(2-n)) ds with R(s)^(2-n) integrating to
  // (n/2) (t^(2/n) - s0^(2/n)) times the radius prefactor.
  double pref = std::pow(n * (n - 2.0) * c_tilde / l_avg, (2.0 - n) / n);
  return c_tilde * std::pow(rho, 2.0 - n) * (t - s0) -
         c_tilde * pref * 0.5 * n * (std::pow(t, 2.0 / n) - std::pow(s0, 2.0 / n));
}

double SelfSimilarSolution::integral(const double* x, double t) const {
  return integral_radial(rho(x), t);
}

double SelfSimilarSolution::velocity_residual(double t) const {
  int n = dim;
  double r = radius(t);
  double lhs = l_avg * r / (n * t);
  double rhs = c_tilde * (n - 2.0) * std::pow(r, 1.0 - n);
  return std::abs(lhs - rhs) / lhs;
}

double SelfSimilarSolution::velocity_residual_fd(double t) const {
  int n = dim;
  double r = radius(t);
  double dt = 1e-5 * t;
  double rp = (radius(t + dt) - radius(t - dt)) / (2.0 * dt);
  // One-sided second-order derivative of the radial profile at the boundary,
  // from inside; the profile vanishes at rho = R.
  double dr = 1e-4 * r;
  double f1 = temperature_radial(r - dr, t);
  double f2 = temperature_radial(r - 2.0 * dr, t);
  double grad = (4.0 * f1 - f2) / (2.0 * dr);
  double lhs = l_avg * rp;
  return std::abs(lhs - grad) / lhs;
}

double SelfSimilarSolution::rescale_defect(const double* x, double t, double lambda) const {
  int n = dim;
  double xs[8];
  double shift = std::pow(lambda, 1.0 / n);
  for (int d = 0; d < n; ++d) xs[d] = shift * x[d];
  double scaled = std::pow(lambda, (n - 2.0) / n) * temperature(xs, lambda * t);
  return std::abs(temperature(x, t) - scaled);
}

std::vector<double> sample_level_ellipsoid(const SelfSimilarSolution& ss, double radius,
                                           int count) {
  int n = ss.dim;
  std::vector<double> pts(static_cast<size_t>(n) * count);
  if (n == 3) {
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      double z = 1.0 - 2.0 * (i + 0.5) / count;
      double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
      double phi = golden * i;
      double dir[3] = {rxy * std::cos(phi), rxy * std::sin(phi), z};
      for (int d = 0; d < 3; ++d) {
        double xd = 0.0;
        for (int e = 0; e < 3; ++e) xd += ss.p(d, e) * dir[e];
        pts[static_cast<size_t>(i) * 3 + d] = radius * xd;
      }
    }
    return pts;
  }
  std::mt19937_64 gen(20260314ULL);
  for (int i = 0; i < count; ++i) {
    double dir[8];
    double norm = 0.0;
    for (int d = 0; d < n; ++d) {
      double u1 = uniform01(gen), u2 = uniform01(gen);
      dir[d] = std::sqrt(-2.0 * std::log(u1 + 1e-300)) * std::cos(2.0 * M_PI * u2);
      norm += dir[d] * dir[d];
    }
    norm = std::sqrt(norm);
    for (int d = 0; d < n; ++d) {
      double xd = 0.0;
      for (int e = 0; e < n; ++e) xd += ss.p(d, e) * (dir[e] / norm);
      pts[static_cast<size_t>(i) * n + d] = radius * xd;
    }
  }
  return pts;
}

double hausdorff_distance(const std::vector<double>& a, const std::vector<double>& b,
                          int dim) {
  size_t na = a.size() / static_cast<size_t>(dim);
  size_t nb = b.size() / static_cast<size_t>(dim);
  if (na == 0 || nb == 0) throw std::invalid_argument("hausdorff of an empty set");
  auto directed = [dim](const std::vector<double>& s, size_t ns, const std::vector<double>& t,
                        size_t nt) {
    double worst = 0.0;
    for (size_t i = 0; i < ns; ++i) {
      double best = 1e300;
      const double* pi = &s[i * static_cast<size_t>(dim)];
      for (size_t j = 0; j < nt; ++j) {
        const double* pj = &t[j * static_cast<size_t>(dim)];
        double d2 = 0.0;
        for (int d = 0; d < dim; ++d) {
          double diff = pi[d] - pj[d];
          d2 += diff * diff;
        }
        if (d2 < best) best = d2;
      }
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(directed(a, na, b, nb), directed(b, nb, a, na));
}

namespace {

struct ShellEstimate {
  double c = 0.0;
  double spread = 0.0;
  PcgResult potential_info;
  PcgResult kernel_info;
};

ShellEstimate shell_ratio(const CoefficientField& media, double r_source, double r_box,
                          double h_target, double rtol) {
  Grid grid = Grid::make(media.dim, r_box, h_target);
  DomainMasks masks = build_masks(grid, r_source);
  StencilOperator op(grid, media);

  Field pot = grid.make_field();
  int idx[8];
  for (std::int64_t c = 0; c < grid.ncells; ++c)
    if (masks.kind[static_cast<size_t>(c)] == CellKind::kSource)
      pot[static_cast<size_t>(c)] = 1.0;
  Field zero = grid.make_field();
  ShellEstimate est;
  est.potential_info = pcg_solve(op, masks.kind, 0.0, zero, pot, rtol, 100000);
  if (!est.potential_info.converged)
    throw std::runtime_error("near-field potential solve did not converge");

  GreensTable kern = solve_greens_numeric(media, r_box, h_target, 1.0, FarField::kZero,
                                          nullptr, rtol, 100000);
  est.kernel_info = kern.solve_info;

  double x[8];
  std::vector<double> ratios;
  for (std::int64_t c = 0; c < grid.ncells; ++c) {
    if (masks.kind[static_cast<size_t>(c)] != CellKind::kFree) continue;
    grid.decode(c, idx);
    grid.center(idx, x);
    double r = 0.0;
    for (int d = 0; d < grid.dim; ++d) r += x[d] * x[d];
    r = std::sqrt(r);
    if (r < 0.25 * r_box || r > 0.5 * r_box) continue;
    double f = kern.values[static_cast<size_t>(c)];
    if (f > 0) ratios.push_back(pot[static_cast<size_t>(c)] / f);
  }
  if (ratios.size() < 8) throw std::runtime_error("near-field shell has too few cells");
  est.c = median(ratios);
  double q10 = quantile(ratios, 0.1), q90 = quantile(ratios, 0.9);
  est.spread = (q90 - q10) / est.c;
  return est;
}

}  // namespace

NearFieldResult near_field(const CoefficientField& media, double r_source, double r_box,
                           double h_target, double rtol) {
  if (!(r_source > 0)) throw std::invalid_argument("near-field requires a source ball");
  NearFieldResult out;
  ShellEstimate small = shell_ratio(media, r_source, 0.5 * r_box, h_target, rtol);
  ShellEstimate big = shell_ratio(media, r_source, r_box, h_target, rtol);
  out.c_star_small = small.c;
  out.c_star_big = big.c;
  out.shell_spread = big.spread;
  out.potential_info = big.potential_info;
  out.kernel_info = big.kernel_info;

  // Screened-capacity extrapolation: c(R) = C* R / (R - a). Exact for a ball
  // in a spherical cavity; falls back to the linear 1/R fit if degenerate.
  double r_big = r_box, r_small = 0.5 * r_box;
  double ratio = small.c / big.c;
  double denom = r_big - ratio * r_small;
  bool harmonic_ok = false;
  if (std::abs(denom) > 1e-12 * r_big) {
    double a = r_big * r_small * (ratio - 1.0) / denom;
    if (a > 0 && a < 0.75 * r_small) {
      out.a_eff = a;
      out.c_star = big.c * (r_big - a) / r_big;
      harmonic_ok = true;
    }
  }
  if (!harmonic_ok) {
    out.a_eff = 0.0;
    out.c_star = (big.c * r_big - small.c * r_small) / (r_big - r_small);
  }
  return out;
}

TimeLimitReport near_field_time_limit(const CoefficientField& media, double r_source,
                                      double r_init, double r_box, double h_target,
                                      double t_final) {
  ProblemSetup setup = make_problem(media, r_box, h_target, r_source, r_init);
  std::vector<double> outs = {0.25 * t_final, t_final};
  std::vector<double> steps = time_grid_with_outputs(0.05, t_final, 0.01, 16, outs);
  RunResult run = run_obstacle(setup, steps, outs);

  // Stationary source potential on the same grid.
  Field pot = setup.grid.make_field();
  for (std::int64_t c = 0; c < setup.grid.ncells; ++c)
    if (setup.masks.kind[static_cast<size_t>(c)] == CellKind::kSource)
      pot[static_cast<size_t>(c)] = 1.0;
  Field zero = setup.grid.make_field();
  PcgResult pr = pcg_solve(setup.op, setup.masks.kind, 0.0, zero, pot, 1e-10, 100000);
  if (!pr.converged) throw std::runtime_error("source potential solve did not converge");

  TimeLimitReport rep;
  rep.t_final = t_final;
  rep.shell_lo = r_source + 2.0 * setup.grid.h;
  rep.shell_hi = std::max(2.0 * r_source, 0.5 * run.fb.back().min_radius);

  int idx[8];
  double x[8];
  for (size_t snap = 0; snap < run.out_times.size(); ++snap) {
    std::vector<double> errs;
    for (std::int64_t c = 0; c < setup.grid.ncells; ++c) {
      if (setup.masks.kind[static_cast<size_t>(c)] != CellKind::kFree) continue;
      setup.grid.decode(c, idx);
      setup.grid.center(idx, x);
      double r = 0.0;
      for (int d = 0; d < setup.grid.dim; ++d) r += x[d] * x[d];
      r = std::sqrt(r);
      if (r < rep.shell_lo || r > rep.shell_hi) continue;
      double p = pot[static_cast<size_t>(c)];
      if (p <= 0) continue;
      double ratio = run.u[snap][static_cast<size_t>(c)] / run.out_times[snap] / p;
      errs.push_back(std::abs(ratio - 1.0));
    }
    double m = median(errs);
    if (snap + 1 == run.out_times.size())
      rep.rel_err = m;
    else
      rep.rel_err_mid = m;
  }
  return rep;
}

SweepResult run_sweep(const CoefficientField& media, const SweepParams& params,
                      const CellProblemResult* cell_in, const NearFieldResult* nf_in) {
  if (params.lambdas.size() != params.h_targets.size())
    throw std::invalid_argument("sweep needs one h per lambda");
  if (params.out_times.empty()) throw std::invalid_argument("sweep needs output times");

  SweepResult out;

  // Homogenized data, decay constant, and the limit solution.
  CellProblemResult cell =
      cell_in ? *cell_in : solve_cell_problems(media, params.cell_resolution);
  out.q = cell.q;
  out.l_avg = cell.l_avg;
  NearFieldResult nf =
      nf_in ? *nf_in
            : near_field(media, params.r_source, params.nearfield_box, params.nearfield_h);
  out.c_star = nf.c_star;
  SelfSimilarSolution ss = SelfSimilarSolution::make(out.q, out.l_avg, out.c_star);
  out.c_tilde = ss.c_tilde;
  ExplicitKernel kernel = ExplicitKernel::make(out.q);

  size_t ref_snap = 0;
  double best = 1e300;
  for (size_t i = 0; i < params.out_times.size(); ++i) {
    double d = std::abs(params.out_times[i] - params.t_ref);
    if (d < best) {
      best = d;
      ref_snap = i;
    }
  }
  out.ref_index = ref_snap;

  std::vector<std::vector<double>> ell;
  for (double t : params.out_times)
    ell.push_back(sample_level_ellipsoid(ss, ss.radius(t), params.ellipsoid_samples));

  double t_final = params.out_times.back();
  std::vector<double> steps = time_grid_with_outputs(params.t_geom, t_final, params.dt0,
                                                     params.steps_per_decade, params.out_times);

  for (size_t li = 0; li < params.lambdas.size(); ++li) {
    double lambda = params.lambdas[li];
    ProblemSetup setup = make_problem(media, params.r_box, params.h_targets[li],
                                      params.r_source, params.r_init, lambda, params.psor);
    RunResult run = run_obstacle(setup, steps, params.out_times);

    SweepEntry entry;
    entry.lambda = lambda;
    entry.h = setup.grid.h;
    entry.comp_residual = run.worst_comp_residual;
    entry.monotone_margin = run.worst_monotone_margin;
    entry.nested_violations = run.nested_violations;

    // Annulus errors and boundary distances at every output time.
    const Grid& g = setup.grid;
    int idx[8];
    double x[8];
    for (size_t snap = 0; snap < run.out_times.size(); ++snap) {
      double t = run.out_times[snap];
      const Field& v = run.v[snap];
      const Field& u = run.u[snap];
      double sup_v = 0.0, sup_u = 0.0;
      for (std::int64_t c = 0; c < g.ncells; ++c) {
        if (setup.masks.kind[static_cast<size_t>(c)] != CellKind::kFree) continue;
        g.decode(c, idx);
        g.center(idx, x);
        double r = 0.0;
        for (int d = 0; d < g.dim; ++d) r += x[d] * x[d];
        r = std::sqrt(r);
        if (r < params.annulus_lo || r > params.annulus_hi) continue;
        sup_v = std::max(sup_v, std::abs(v[static_cast<size_t>(c)] - ss.temperature(x, t)));
        sup_u = std::max(sup_u, std::abs(u[static_cast<size_t>(c)] - ss.integral(x, t)));
      }
      entry.times.push_back(t);
      entry.sup_v_err.push_back(sup_v);
      entry.sup_u_err.push_back(sup_u);
      entry.hausdorff.push_back(hausdorff_distance(run.fb[snap].points, ell[snap], g.dim));
    }

    // Singularity ratios on the innermost resolvable shell at the final time.
    entry.shell_lo = setup.r_source + g.h;
    entry.shell_hi = setup.r_source + 3.0 * g.h;
    const Field& u_fin = run.u.back();
    double t_fin = run.out_times.back();
    std::vector<double> raw, corr;
    for (std::int64_t c = 0; c < g.ncells; ++c) {
      if (setup.masks.kind[static_cast<size_t>(c)] != CellKind::kFree) continue;
      g.decode(c, idx);
      g.center(idx, x);
      double r = 0.0;
      for (int d = 0; d < g.dim; ++d) r += x[d] * x[d];
      r = std::sqrt(r);
      if (r < entry.shell_lo || r > entry.shell_hi) continue;
      double f0 = kernel.value(x);
      double uu = ss.integral(x, t_fin);
      double val = u_fin[static_cast<size_t>(c)];
      if (f0 > 0) raw.push_back(val / (out.c_star * t_fin * f0));
      if (uu > 0) corr.push_back(val / uu);
    }
    entry.sing_ratio_raw = median(raw);
    entry.sing_ratio_int = median(corr);

    out.entries.push_back(entry);
  }

  out.sup_u_decreasing = out.entries.size() >= 2;
  out.sup_v_decreasing = out.entries.size() >= 2;
  out.hausdorff_decreasing = out.entries.size() >= 2;
  for (size_t i = 1; i < out.entries.size(); ++i) {
    if (!(out.entries[i].sup_u_err[ref_snap] < out.entries[i - 1].sup_u_err[ref_snap]))
      out.sup_u_decreasing = false;
    if (!(out.entries[i].sup_v_err[ref_snap] < out.entries[i - 1].sup_v_err[ref_snap]))
      out.sup_v_decreasing = false;
    if (!(out.entries[i].hausdorff[ref_snap] < out.entries[i - 1].hausdorff[ref_snap]))
      out.hausdorff_decreasing = false;
  }
  return out;
}

}  // namespace stefan
