#include "stefan/vi_solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stefan {

double initial_temperature(double radius, double r_source, double r_init) {
  if (radius <= r_source) return 1.0;
  if (radius >= r_init) return 0.0;
  const double s = (r_init - radius) / (r_init - r_source);
  return std::min(1.0, std::max(0.0, s * (2.0 - s)));
}

ProblemSetup make_problem(const CoefficientField& media, double r_box, double h_target,
                          double r_source, double r_init, double lambda, PsorParams psor) {
  if (r_init <= r_source)
    throw std::invalid_argument("initial phase radius must exceed the source radius");
  if (lambda <= 0.0) throw std::invalid_argument("lambda must be positive");

  const int dim = media.dim;
  const double shift = std::pow(lambda, 1.0 / dim);

  ProblemSetup s;
  s.grid = Grid::make(dim, r_box, h_target);
  s.lambda = lambda;
  s.c_time = std::pow(lambda, (2.0 - dim) / static_cast<double>(dim));
  s.bc_scale = std::pow(lambda, (dim - 2.0) / static_cast<double>(dim));
  s.r_source = r_source / shift;
  s.r_init = r_init / shift;
  s.psor = psor;
  s.media_name = media.name;
  if (s.r_source < 3.0 * s.grid.h)
    throw std::invalid_argument("rescaled source ball is thinner than 3 cells; refine the grid");

  s.masks = build_masks(s.grid, s.r_source);
  s.op = StencilOperator(s.grid, media, shift);

  s.f = s.grid.make_field();
  s.v0 = s.grid.make_field();
  std::vector<int> idx(static_cast<size_t>(dim), 0);
  std::vector<double> x(static_cast<size_t>(dim), 0.0);
  double fmax = 0.0;
  for (std::int64_t c = 0; c < s.grid.ncells; ++c) {
    s.grid.center(idx.data(), x.data());
    const double r = s.grid.radius(idx.data());
    const double w0 = initial_temperature(shift * r, r_source, r_init);
    s.v0[static_cast<size_t>(c)] = s.bc_scale * w0;
    double fv;
    if (w0 > 0.0) {
      fv = w0;
    } else {
      for (int d = 0; d < dim; ++d) x[static_cast<size_t>(d)] *= shift;
      fv = -1.0 / media.g(x.data());
    }
    s.f[static_cast<size_t>(c)] = fv;
    if (s.masks.kind[static_cast<size_t>(c)] == CellKind::kFree)
      fmax = std::max(fmax, std::fabs(fv));
    for (int d = 0; d < dim; ++d) {
      if (++idx[static_cast<size_t>(d)] < s.grid.cells_per_axis) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
  s.f_scale = std::max(fmax, 1e-30);
  return s;
}

std::vector<double> time_grid_uniform(double t_final, double dt) {
  if (t_final <= 0.0 || dt <= 0.0) throw std::invalid_argument("bad time grid parameters");
  const int n = std::max(1, static_cast<int>(std::ceil(t_final / dt - 1e-12)));
  std::vector<double> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = t_final * (i + 1) / n;
  return out;
}

std::vector<double> time_grid_geometric(double t0, double t_final, double dt0, int per_decade) {
  if (!(0.0 < dt0 && dt0 <= t0 && t0 < t_final) || per_decade < 1)
    throw std::invalid_argument("bad geometric time grid parameters");
  std::vector<double> out = time_grid_uniform(t0, dt0);
  const double ratio = std::pow(10.0, 1.0 / per_decade);
  double t = t0;
  while (t < t_final * (1.0 - 1e-12)) {
    t = std::min(t * ratio, t_final);
    out.push_back(t);
  }
  return out;
}

std::vector<double> time_grid_with_outputs(double t0, double t_final, double dt0,
                                           int per_decade, const std::vector<double>& outs) {
  std::vector<double> grid = time_grid_geometric(t0, t_final, dt0, per_decade);
  for (double t : outs) {
    if (!(t > 0.0) || t > t_final * (1.0 + 1e-12))
      throw std::invalid_argument("output time outside (0, t_final]");
    grid.push_back(std::min(t, t_final));
  }
  std::sort(grid.begin(), grid.end());
  std::vector<double> merged;
  merged.reserve(grid.size());
  for (double t : grid)
    if (merged.empty() || t - merged.back() > 1e-9 * std::max(1.0, t)) merged.push_back(t);
  return merged;
}

FreeBoundarySnapshot extract_free_boundary(const Grid& grid, const DomainMasks& masks,
                                           const Field& u, double t, double threshold) {
  FreeBoundarySnapshot snap;
  snap.t = t;
  snap.min_radius = 0.0;
  snap.max_radius = 0.0;
  const int dim = grid.dim;
  std::vector<int> idx(static_cast<size_t>(dim), 0);
  std::vector<double> x(static_cast<size_t>(dim), 0.0);
  bool first = true;
  for (std::int64_t c = 0; c < grid.ncells; ++c) {
    const bool outer = masks.kind[static_cast<size_t>(c)] == CellKind::kOuter;
    if (!outer && u[static_cast<size_t>(c)] > threshold) {
      ++snap.n_positive;
      bool boundary = false;
      for (int d = 0; d < dim && !boundary; ++d) {
        const std::int64_t sd = grid.stride[static_cast<size_t>(d)];
        if (idx[static_cast<size_t>(d)] > 0 && u[static_cast<size_t>(c - sd)] <= threshold)
          boundary = true;
        if (idx[static_cast<size_t>(d)] + 1 < grid.cells_per_axis &&
            u[static_cast<size_t>(c + sd)] <= threshold)
          boundary = true;
      }
      if (boundary) {
        grid.center(idx.data(), x.data());
        const double r = grid.radius(idx.data());
        if (first) {
          snap.min_radius = snap.max_radius = r;
          first = false;
        } else {
          snap.min_radius = std::min(snap.min_radius, r);
          snap.max_radius = std::max(snap.max_radius, r);
        }
        for (int d = 0; d < dim; ++d) snap.points.push_back(x[static_cast<size_t>(d)]);
        ++snap.count;
      }
    }
    for (int d = 0; d < dim; ++d) {
      if (++idx[static_cast<size_t>(d)] < grid.cells_per_axis) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
  return snap;
}

namespace {

struct SweepWorkspace {
  std::vector<std::int64_t> red, black;
  std::vector<std::int64_t> free_cells;
};

SweepWorkspace build_workspace(const Grid& grid, const DomainMasks& masks) {
  SweepWorkspace ws;
  std::vector<int> idx(static_cast<size_t>(grid.dim), 0);
  for (std::int64_t c = 0; c < grid.ncells; ++c) {
    if (masks.kind[static_cast<size_t>(c)] == CellKind::kFree) {
      int parity = 0;
      for (int d = 0; d < grid.dim; ++d) parity += idx[static_cast<size_t>(d)];
      (parity % 2 == 0 ? ws.red : ws.black).push_back(c);
      ws.free_cells.push_back(c);
    }
    for (int d = 0; d < grid.dim; ++d) {
      if (++idx[static_cast<size_t>(d)] < grid.cells_per_axis) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
  return ws;
}

// One implicit step solved by projected SOR in red-black order.
int psor_step(const ProblemSetup& s, const SweepWorkspace& ws, const Field& b, double tau,
              Field& u, double tol_abs, double* comp_out) {
  const StencilOperator& op = s.op;
  const double omega = s.psor.omega;
  const int max_sweeps = s.psor.max_sweep_scale * s.grid.cells_per_axis;

  int sweep = 0;
  double comp = 0.0;
  for (;;) {
    ++sweep;
    for (const auto* list : {&ws.red, &ws.black}) {
      for (std::int64_t c : *list) {
        const size_t ci = static_cast<size_t>(c);
        const double denom = tau + op.diag(c);
        const double resid = b[ci] - tau * u[ci] - op.apply_neg_row(u, c);
        double un = u[ci] + omega * resid / denom;
        u[ci] = un > 0.0 ? un : 0.0;
      }
    }
    const bool check = (sweep % s.psor.check_every == 0) || sweep >= max_sweeps;
    if (check) {
      comp = 0.0;
      for (std::int64_t c : ws.free_cells) {
        const size_t ci = static_cast<size_t>(c);
        const double resid = tau * u[ci] + op.apply_neg_row(u, c) - b[ci];
        const double m = std::fabs(std::min(u[ci], resid));
        if (m > comp) comp = m;
      }
      if (comp <= tol_abs || sweep >= max_sweeps) break;
    }
  }
  *comp_out = comp;
  return sweep;
}

}  // namespace

RunResult run_obstacle(const ProblemSetup& setup, const std::vector<double>& step_times,
                       const std::vector<double>& out_times) {
  if (step_times.empty()) throw std::invalid_argument("empty time grid");
  for (size_t i = 0; i + 1 < step_times.size(); ++i)
    if (step_times[i + 1] <= step_times[i])
      throw std::invalid_argument("time grid must be strictly increasing");
  if (step_times.front() <= 0.0) throw std::invalid_argument("time grid must start after 0");

  const Grid& grid = setup.grid;
  const DomainMasks& masks = setup.masks;
  SweepWorkspace ws = build_workspace(grid, masks);

  RunResult res;
  Field u = grid.make_field();
  Field u_prev = grid.make_field();
  Field b = grid.make_field();

  const double tol_abs = setup.psor.rtol * setup.f_scale;
  std::vector<char> was_positive(static_cast<size_t>(grid.ncells), 0);

  size_t next_out = 0;
  double t_prev = 0.0;
  for (double t : step_times) {
    const double dt = t - t_prev;
    const double tau = setup.c_time / dt;
    u_prev = u;

    for (std::int64_t c = 0; c < grid.ncells; ++c) {
      const size_t ci = static_cast<size_t>(c);
      switch (masks.kind[ci]) {
        case CellKind::kSource: u[ci] = setup.bc_scale * t; break;
        case CellKind::kOuter: u[ci] = 0.0; break;
        case CellKind::kFree: b[ci] = tau * u_prev[ci] + setup.f[ci]; break;
      }
    }

    StepDiagnostics d;
    d.t = t;
    d.dt = dt;
    d.sweeps = psor_step(setup, ws, b, tau, u, tol_abs, &d.comp_residual);

    d.min_u = 0.0;
    d.monotone_margin = 0.0;
    bool first = true;
    for (std::int64_t c : ws.free_cells) {
      const size_t ci = static_cast<size_t>(c);
      const double gap = u[ci] - u_prev[ci];
      if (first) {
        d.min_u = u[ci];
        d.monotone_margin = gap;
        first = false;
      } else {
        d.min_u = std::min(d.min_u, u[ci]);
        d.monotone_margin = std::min(d.monotone_margin, gap);
      }
      if (was_positive[ci] && u[ci] <= kFreeBoundaryThreshold) ++d.nested_violations;
      if (u[ci] > kFreeBoundaryThreshold) was_positive[ci] = 1;
    }

    FreeBoundarySnapshot fb = extract_free_boundary(grid, masks, u, t);
    d.min_radius = fb.min_radius;
    d.max_radius = fb.max_radius;
    d.n_positive = fb.n_positive;
    if (fb.max_radius >= grid.r_box - 1.5 * grid.h)
      throw std::runtime_error("positive phase reached the outer layer at t = " + std::to_string(t) +
                               " (max radius " + std::to_string(fb.max_radius) + ", box " +
                               std::to_string(grid.r_box) + "); enlarge the box");

    res.worst_comp_residual = std::max(res.worst_comp_residual, d.comp_residual);
    res.worst_monotone_margin = std::min(res.worst_monotone_margin, d.monotone_margin);
    res.nested_violations += d.nested_violations;
    res.steps.push_back(d);

    if (next_out < out_times.size() &&
        std::fabs(t - out_times[next_out]) <= 1e-9 * std::max(1.0, out_times[next_out])) {
      res.out_times.push_back(t);
      res.u.push_back(u);
      Field v = grid.make_field();
      for (std::int64_t c = 0; c < grid.ncells; ++c) {
        const size_t ci = static_cast<size_t>(c);
        double vv = (u[ci] - u_prev[ci]) / dt;
        if (std::fabs(vv) < 1e-14) vv = 0.0;
        v[ci] = vv;
      }
      res.v.push_back(std::move(v));
      res.fb.push_back(std::move(fb));
      ++next_out;
    }
    t_prev = t;
  }
  if (next_out != out_times.size())
    throw std::invalid_argument("output times must appear in the step grid");
  return res;
}

ComparisonReport comparison_test(const ProblemSetup& low, const ProblemSetup& high,
                                 const std::vector<double>& step_times,
                                 const std::vector<double>& out_times, double slack) {
  if (low.grid.ncells != high.grid.ncells || low.grid.dim != high.grid.dim)
    throw std::invalid_argument("comparison requires a common grid");
  for (std::int64_t c = 0; c < low.grid.ncells; ++c) {
    const size_t ci = static_cast<size_t>(c);
    if (low.masks.kind[ci] == CellKind::kFree && high.masks.kind[ci] == CellKind::kFree &&
        low.f[ci] > high.f[ci] + 1e-14)
      throw std::invalid_argument("comparison pair is not ordered: f_low > f_high somewhere");
  }

  RunResult rl = run_obstacle(low, step_times, out_times);
  RunResult rh = run_obstacle(high, step_times, out_times);

  ComparisonReport rep;
  for (size_t k = 0; k < rl.u.size(); ++k) {
    for (size_t i = 0; i < rl.u[k].size(); ++i) {
      rep.max_violation_u = std::max(rep.max_violation_u, rl.u[k][i] - rh.u[k][i]);
      rep.max_violation_v = std::max(rep.max_violation_v, rl.v[k][i] - rh.v[k][i]);
    }
  }
  rep.pass = rep.max_violation_u <= slack;
  return rep;
}

WeakMonotonicityReport weak_monotonicity_check(const ProblemSetup& setup, const RunResult& run,
                                               size_t snap_index, double v_floor) {
  WeakMonotonicityReport rep;
  if (snap_index >= run.u.size()) throw std::out_of_range("snapshot index out of range");
  const Field& u = run.u[snap_index];
  const Field& v = run.v[snap_index];
  const double t = run.out_times[snap_index];
  rep.finite = true;
  for (size_t i = 0; i < u.size(); ++i) {
    if (setup.masks.kind[i] != CellKind::kFree) continue;
    if (setup.v0[i] > 0.0) {
      if (v[i] < v_floor) {
        rep.finite = false;
        continue;
      }
      rep.c1 = std::max(rep.c1, setup.v0[i] / v[i]);
    }
    if (u[i] > kFreeBoundaryThreshold && v[i] >= v_floor)
      rep.c2 = std::max(rep.c2, u[i] / (t * v[i]));
  }
  return rep;
}

}  // namespace stefan
