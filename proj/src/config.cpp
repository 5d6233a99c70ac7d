#include "stefan/config.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "stefan/io.hpp"

namespace stefan {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& text) {
  const char* c = text.c_str();
  char* end = nullptr;
  double v = std::strtod(c, &end);
  if (end == c || *end != '\0')
    throw ConfigError("value of " + key + " is not a number: '" + text + "'");
  return v;
}

long long parse_int(const std::string& key, const std::string& text) {
  const char* c = text.c_str();
  char* end = nullptr;
  long long v = std::strtoll(c, &end, 10);
  if (end == c || *end != '\0')
    throw ConfigError("value of " + key + " is not an integer: '" + text + "'");
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty element in list " + key);
    out.push_back(parse_double(key, item));
  }
  if (out.empty()) throw ConfigError("list " + key + " is empty");
  return out;
}

std::string join_list(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_g17(v[i]);
  }
  return out;
}

void ensure_triangle(ExperimentConfig& cfg) {
  if (!cfg.a_entries.empty()) return;
  cfg.a_entries.resize(static_cast<size_t>(cfg.dim));
  for (int i = 0; i < cfg.dim; ++i) {
    cfg.a_entries[static_cast<size_t>(i)].assign(static_cast<size_t>(cfg.dim - i), "0");
    cfg.a_entries[static_cast<size_t>(i)][0] = "";  // diagonal must be given explicitly
  }
}

// One assignment with a fully qualified key. Returns false if unknown.
bool set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "media.preset") {
    cfg.media_preset = value;
    return true;
  }
  if (key == "media.dim") {
    if (!cfg.a_entries.empty())
      throw ConfigError("media.dim must come before the media.aij entries");
    cfg.dim = static_cast<int>(parse_int(key, value));
    return true;
  }
  if (key == "media.g") {
    cfg.g_expr = value;
    return true;
  }
  if (key.size() == 9 && key.compare(0, 7, "media.a") == 0 &&
      std::isdigit(static_cast<unsigned char>(key[7])) &&
      std::isdigit(static_cast<unsigned char>(key[8]))) {
    int i = key[7] - '1';
    int j = key[8] - '1';
    if (i < 0 || j < i || j >= cfg.dim)
      throw ConfigError("matrix entry " + key + " is outside the upper triangle for dim " +
                        std::to_string(cfg.dim));
    ensure_triangle(cfg);
    cfg.a_entries[static_cast<size_t>(i)][static_cast<size_t>(j - i)] = value;
    return true;
  }
  if (key == "domain.r_box") {
    cfg.r_box = parse_double(key, value);
    return true;
  }
  if (key == "domain.r_source") {
    cfg.r_source = parse_double(key, value);
    return true;
  }
  if (key == "domain.r_init") {
    cfg.r_init = parse_double(key, value);
    return true;
  }
  if (key == "grid.h") {
    cfg.h = parse_double(key, value);
    return true;
  }
  if (key == "time.t_final") {
    cfg.t_final = parse_double(key, value);
    return true;
  }
  if (key == "time.dt0") {
    cfg.dt0 = parse_double(key, value);
    return true;
  }
  if (key == "time.t_geom") {
    cfg.t_geom = parse_double(key, value);
    return true;
  }
  if (key == "time.steps_per_decade") {
    cfg.steps_per_decade = static_cast<int>(parse_int(key, value));
    return true;
  }
  if (key == "time.out_times") {
    cfg.out_times = parse_list(key, value);
    return true;
  }
  if (key == "solver.omega") {
    cfg.psor.omega = parse_double(key, value);
    return true;
  }
  if (key == "solver.rtol") {
    cfg.psor.rtol = parse_double(key, value);
    return true;
  }
  if (key == "solver.max_sweep_scale") {
    cfg.psor.max_sweep_scale = static_cast<int>(parse_int(key, value));
    return true;
  }
  if (key == "solver.check_every") {
    cfg.psor.check_every = static_cast<int>(parse_int(key, value));
    return true;
  }
  if (key == "solver.cg_rtol") {
    cfg.cg_rtol = parse_double(key, value);
    return true;
  }
  if (key == "sweep.lambdas") {
    cfg.lambdas = parse_list(key, value);
    return true;
  }
  if (key == "sweep.h_targets") {
    cfg.h_targets = parse_list(key, value);
    return true;
  }
  if (key == "sweep.t_ref") {
    cfg.t_ref = parse_double(key, value);
    return true;
  }
  if (key == "sweep.annulus_lo") {
    cfg.annulus_lo = parse_double(key, value);
    return true;
  }
  if (key == "sweep.annulus_hi") {
    cfg.annulus_hi = parse_double(key, value);
    return true;
  }
  if (key == "sweep.cell_resolution") {
    cfg.cell_resolution = static_cast<int>(parse_int(key, value));
    return true;
  }
  if (key == "sweep.nearfield_box") {
    cfg.nearfield_box = parse_double(key, value);
    return true;
  }
  if (key == "sweep.nearfield_h") {
    cfg.nearfield_h = parse_double(key, value);
    return true;
  }
  if (key == "sweep.ellipsoid_samples") {
    cfg.ellipsoid_samples = static_cast<int>(parse_int(key, value));
    return true;
  }
  if (key == "sweep.sup_v_max") {
    cfg.sup_v_max = parse_double(key, value);
    return true;
  }
  if (key == "sweep.sup_u_max") {
    cfg.sup_u_max = parse_double(key, value);
    return true;
  }
  if (key == "sweep.hausdorff_max") {
    cfg.hausdorff_max = parse_double(key, value);
    return true;
  }
  if (key == "sweep.ratio_lo") {
    cfg.ratio_lo = parse_double(key, value);
    return true;
  }
  if (key == "sweep.ratio_hi") {
    cfg.ratio_hi = parse_double(key, value);
    return true;
  }
  if (key == "barriers.t0") {
    cfg.barrier_t0 = parse_double(key, value);
    return true;
  }
  if (key == "barriers.quad_box") {
    cfg.quad_box = parse_double(key, value);
    return true;
  }
  if (key == "barriers.quad_h") {
    cfg.quad_h = parse_double(key, value);
    return true;
  }
  if (key == "greens.box") {
    cfg.greens_box = parse_double(key, value);
    return true;
  }
  if (key == "greens.h") {
    cfg.greens_h = parse_double(key, value);
    return true;
  }
  if (key == "greens.lambdas") {
    cfg.greens_lambdas = parse_list(key, value);
    return true;
  }
  if (key == "output.root") {
    cfg.out_root = value;
    return true;
  }
  if (key == "output.seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    return true;
  }
  return false;
}

}  // namespace

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  ExperimentConfig cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string where = path + ":" + std::to_string(lineno);
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (section.empty()) throw ConfigError(where + ": key outside any [section]");
    std::string qualified = section + "." + key;
    try {
      if (!set_key(cfg, qualified, value))
        throw ConfigError("unknown key '" + qualified + "'");
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return cfg;
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like section.key=value: " + assignment);
  std::string key = trim(assignment.substr(0, eq));
  std::string value = trim(assignment.substr(eq + 1));
  if (!set_key(cfg, key, value)) throw ConfigError("unknown key '" + key + "'");
}

CoefficientField make_media(const ExperimentConfig& cfg) {
  if (cfg.media_preset != "expression") return make_media_preset(cfg.media_preset, cfg.dim);
  if (cfg.a_entries.empty())
    throw ConfigError("expression media needs media.a11..a" + std::to_string(cfg.dim) +
                      std::to_string(cfg.dim) + " entries");
  for (int i = 0; i < cfg.dim; ++i)
    if (cfg.a_entries[static_cast<size_t>(i)][0].empty())
      throw ConfigError("expression media is missing diagonal entry media.a" +
                        std::to_string(i + 1) + std::to_string(i + 1));
  try {
    return make_expression_media(cfg.dim, cfg.a_entries, cfg.g_expr);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad media expression: ") + e.what());
  }
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.dim < 3 || cfg.dim > 6)
    throw ConfigError("dim must be between 3 and 6 (kernel decay needs n >= 3)");
  if (!(cfg.r_box > 0) || !(cfg.h > 0) || !(cfg.r_source > 0))
    throw ConfigError("r_box, r_source, and h must be positive");
  if (!(cfg.r_init > cfg.r_source + 2.0 * cfg.h))
    throw ConfigError("r_init must exceed r_source by at least two cells");
  if (!(cfg.r_init < cfg.r_box))
    throw ConfigError("r_init must be strictly inside the box");
  if (!(cfg.r_source >= 3.0 * cfg.h))
    throw ConfigError("source ball needs r_source >= 3 h to be resolvable");
  if (!(cfg.t_final > 0) || !(cfg.dt0 > 0) || !(cfg.t_geom > 0) ||
      cfg.t_geom > cfg.t_final)
    throw ConfigError("need 0 < dt0, 0 < t_geom <= t_final");
  if (cfg.steps_per_decade < 4) throw ConfigError("steps_per_decade must be at least 4");
  if (cfg.out_times.empty()) throw ConfigError("out_times must not be empty");
  for (size_t i = 0; i < cfg.out_times.size(); ++i) {
    if (!(cfg.out_times[i] > 0) || cfg.out_times[i] > cfg.t_final * (1 + 1e-12))
      throw ConfigError("out_times must lie in (0, t_final]");
    if (i > 0 && !(cfg.out_times[i] > cfg.out_times[i - 1]))
      throw ConfigError("out_times must be strictly increasing");
  }
  if (!(cfg.psor.omega > 0) || cfg.psor.omega >= 2)
    throw ConfigError("solver.omega must lie in (0, 2)");
  if (!(cfg.psor.rtol > 0) || !(cfg.cg_rtol > 0))
    throw ConfigError("solver tolerances must be positive");

  if (cfg.lambdas.size() != cfg.h_targets.size())
    throw ConfigError("sweep.h_targets must pair up with sweep.lambdas");
  CoefficientField media = make_media(cfg);
  for (size_t i = 0; i < cfg.lambdas.size(); ++i) {
    double lam = cfg.lambdas[i];
    double ht = cfg.h_targets[i];
    if (!(lam >= 1)) throw ConfigError("sweep lambdas must be >= 1");
    if (i > 0 && !(lam > cfg.lambdas[i - 1]))
      throw ConfigError("sweep lambdas must be strictly increasing");
    double shrink = std::pow(lam, -1.0 / cfg.dim);
    if (!(cfg.r_source * shrink * (1 + 1e-9) >= 3.0 * ht))
      throw ConfigError("rescaled source unresolvable at lambda = " + format_g17(lam) +
                        ": need h <= r_source lambda^(-1/n) / 3");
    if (!media.constant_in_space && !(ht <= shrink / 8.0 * (1 + 1e-9)))
      throw ConfigError("oscillation unresolvable at lambda = " + format_g17(lam) +
                        ": need h <= lambda^(-1/n) / 8");
  }
  if (!media.constant_in_space && !(cfg.h <= 1.0 / 8.0))
    throw ConfigError("base grid must resolve the unit cell: h <= 1/8");
  if (!(cfg.annulus_lo > 0) || !(cfg.annulus_hi > cfg.annulus_lo) ||
      !(cfg.annulus_hi < cfg.r_box))
    throw ConfigError("annulus must satisfy 0 < lo < hi < r_box");
  if (cfg.cell_resolution < 8) throw ConfigError("cell_resolution must be at least 8");
  if (!(cfg.nearfield_h > 0) || !(cfg.r_source >= 3.0 * cfg.nearfield_h))
    throw ConfigError("near-field grid must resolve the source ball");
  if (!(cfg.nearfield_box / 8.0 >= cfg.r_source + 2.0 * cfg.nearfield_h))
    throw ConfigError("near-field box too small: the half-box shell must clear the source");
  if (!(cfg.ratio_lo > 0) || !(cfg.ratio_lo < 1) || !(cfg.ratio_hi > 1))
    throw ConfigError("singularity ratio window must straddle 1");
  if (cfg.ellipsoid_samples < 64)
    throw ConfigError("ellipsoid_samples must be at least 64");

  if (!(cfg.barrier_t0 > 0) || cfg.barrier_t0 > cfg.t_final)
    throw ConfigError("barriers.t0 must lie in (0, t_final]");
  if (!(cfg.quad_h > 0) || !(cfg.quad_box >= 2.0 + 3.0 * cfg.quad_h))
    throw ConfigError("quadratic barrier box must cover the probe annulus  |x| >= 2");
  if (!media.constant_in_space && !(cfg.quad_h <= 1.0 / 8.0))
    throw ConfigError("quadratic barrier grid must resolve the unit cell: h <= 1/8");

  if (!(cfg.greens_h > 0) || !(cfg.greens_box > 0) ||
      !(cfg.greens_box >= 16.0 * cfg.greens_h))
    throw ConfigError("kernel solve box must span at least 16 cells per side");
  for (size_t i = 0; i < cfg.greens_lambdas.size(); ++i) {
    double lam = cfg.greens_lambdas[i];
    if (!(lam >= 1)) throw ConfigError("greens lambdas must be >= 1");
    if (i > 0 && !(lam > cfg.greens_lambdas[i - 1]))
      throw ConfigError("greens lambdas must be strictly increasing");
    double shrink = std::pow(lam, -1.0 / cfg.dim);
    if (!media.constant_in_space && !(cfg.greens_h <= shrink / 8.0 * (1 + 1e-9)))
      throw ConfigError("kernel grid cannot resolve oscillations at lambda = " +
                        format_g17(lam));
  }
  if (cfg.out_root.empty()) throw ConfigError("output.root must not be empty");

  MediaValidation mv = validate_media(media, 2048, cfg.seed);
  if (!mv.pass) throw ConfigError("media validation failed: " + mv.message);
}

std::string echo_config(const ExperimentConfig& cfg) {
  std::string s;
  auto put = [&s](const std::string& key, const std::string& value) {
    s += key;
    s += " = ";
    s += value;
    s += "\n";
  };
  put("media.preset", cfg.media_preset);
  put("media.dim", std::to_string(cfg.dim));
  if (cfg.media_preset == "expression") {
    for (int i = 0; i < cfg.dim; ++i)
      for (int j = i; j < cfg.dim; ++j)
        put("media.a" + std::to_string(i + 1) + std::to_string(j + 1),
            cfg.a_entries.empty() ? "" : cfg.a_entries[static_cast<size_t>(i)]
                                                      [static_cast<size_t>(j - i)]);
    put("media.g", cfg.g_expr);
  }
  put("domain.r_box", format_g17(cfg.r_box));
  put("domain.r_source", format_g17(cfg.r_source));
  put("domain.r_init", format_g17(cfg.r_init));
  put("grid.h", format_g17(cfg.h));
  put("time.t_final", format_g17(cfg.t_final));
  put("time.dt0", format_g17(cfg.dt0));
  put("time.t_geom", format_g17(cfg.t_geom));
  put("time.steps_per_decade", std::to_string(cfg.steps_per_decade));
  put("time.out_times", join_list(cfg.out_times));
  put("solver.omega", format_g17(cfg.psor.omega));
  put("solver.rtol", format_g17(cfg.psor.rtol));
  put("solver.max_sweep_scale", std::to_string(cfg.psor.max_sweep_scale));
  put("solver.check_every", std::to_string(cfg.psor.check_every));
  put("solver.cg_rtol", format_g17(cfg.cg_rtol));
  put("sweep.lambdas", join_list(cfg.lambdas));
  put("sweep.h_targets", join_list(cfg.h_targets));
  put("sweep.t_ref", format_g17(cfg.t_ref));
  put("sweep.annulus_lo", format_g17(cfg.annulus_lo));
  put("sweep.annulus_hi", format_g17(cfg.annulus_hi));
  put("sweep.cell_resolution", std::to_string(cfg.cell_resolution));
  put("sweep.nearfield_box", format_g17(cfg.nearfield_box));
  put("sweep.nearfield_h", format_g17(cfg.nearfield_h));
  put("sweep.ellipsoid_samples", std::to_string(cfg.ellipsoid_samples));
  put("sweep.sup_v_max", format_g17(cfg.sup_v_max));
  put("sweep.sup_u_max", format_g17(cfg.sup_u_max));
  put("sweep.hausdorff_max", format_g17(cfg.hausdorff_max));
  put("sweep.ratio_lo", format_g17(cfg.ratio_lo));
  put("sweep.ratio_hi", format_g17(cfg.ratio_hi));
  put("barriers.t0", format_g17(cfg.barrier_t0));
  put("barriers.quad_box", format_g17(cfg.quad_box));
  put("barriers.quad_h", format_g17(cfg.quad_h));
  put("greens.box", format_g17(cfg.greens_box));
  put("greens.h", format_g17(cfg.greens_h));
  put("greens.lambdas", join_list(cfg.greens_lambdas));
  put("output.root", cfg.out_root);
  put("output.seed", std::to_string(cfg.seed));
  return s;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::string echo = echo_config(cfg);
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : echo) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double support_bound_estimate(const Eigen::MatrixXd& q, double l_avg, double r_source,
                              double r_init, double t) {
  int n = static_cast<int>(q.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
  double emax = es.eigenvalues().maxCoeff();
  double sqrt_det = std::sqrt(q.determinant());
  // Capacity-type bound: c_star <= (n-2) sigma_{n-1} emax r_source^(n-2),
  // so the level-set radius R(t)^n <= n (n-2) c~ t / L with
  // c~ = emax r_source^(n-2) / sqrt(det); the ellipsoid stretches the
  // euclidean radius by at most sqrt(emax).
  double c_tilde = emax * std::pow(r_source, n - 2.0) / sqrt_det;
  double rn = n * (n - 2.0) * c_tilde * t / l_avg + std::pow(r_init, n);
  return 1.05 * std::sqrt(emax) * std::pow(rn, 1.0 / n);
}

}  // namespace stefan
