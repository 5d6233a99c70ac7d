#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stefan/config.hpp"
#include "stefan/io.hpp"
#include "stefan/media.hpp"

using namespace stefan;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/stefan_io_test_") + name;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("format_g17 round-trips doubles exactly") {
  const double values[] = {0.0,     1.0,      -1.0,     1.0 / 3.0, 0.1,
                           1e-300,  1e300,    3.0e-5,   -2.5,      6.02214076e23,
                           5e-324,  1.0 / 7.0};
  for (double v : values) {
    std::string s = format_g17(v);
    double back = std::strtod(s.c_str(), nullptr);
    CHECK(back == v);
  }
  // Integral doubles should not pick up noise digits.
  CHECK(format_g17(2.0) == "2");
  CHECK(format_g17(-16.0) == "-16");
}

TEST_CASE("binary field round-trip preserves grid and data bitwise") {
  Grid g = Grid::make(3, 1.0, 1.0 / 4.0);
  Field f(static_cast<size_t>(g.ncells));
  for (std::int64_t c = 0; c < g.ncells; ++c) {
    int idx[3];
    double x[3];
    g.decode(c, idx);
    g.center(idx, x);
    f[static_cast<size_t>(c)] = x[0] * 1e-7 + x[1] * x[1] - 3.0 * x[2];
  }
  std::string path = temp_path("field.bin");
  write_field(path, g, f);
  LoadedField lf = read_field(path);
  CHECK(lf.grid.dim == g.dim);
  CHECK(lf.grid.cells_per_axis == g.cells_per_axis);
  CHECK(lf.grid.h == g.h);
  CHECK(lf.grid.r_box == g.r_box);
  REQUIRE(lf.data.size() == f.size());
  for (size_t i = 0; i < f.size(); ++i) CHECK(lf.data[i] == f[i]);

  // Mismatched field size is rejected before anything is written.
  Field wrong(f.size() - 1, 0.0);
  CHECK_THROWS(write_field(temp_path("bad.bin"), g, wrong));

  // A file with a clobbered header is rejected.
  std::string garbled = read_text(path);
  garbled[0] = 'X';
  write_text(temp_path("garbled.bin"), garbled);
  CHECK_THROWS(read_field(temp_path("garbled.bin")));
  CHECK_THROWS(read_field(temp_path("no_such_file.bin")));
}

TEST_CASE("csv writer emits deterministic bytes and checks row width") {
  std::string path1 = temp_path("a.csv");
  std::string path2 = temp_path("b.csv");
  auto emit = [](const std::string& path) {
    CsvWriter w(path, {"t", "radius", "value"});
    w.row({0.1, 1.0 / 3.0, -2.5e-8});
    w.row({0.2, 2.0 / 3.0, 5e-324});
  };
  emit(path1);
  emit(path2);
  std::string b1 = read_text(path1);
  std::string b2 = read_text(path2);
  CHECK(b1 == b2);
  CHECK(b1.substr(0, 15) == "t,radius,value\n");
  // Values render in round-trip form.
  CHECK(b1.find(format_g17(1.0 / 3.0)) != std::string::npos);

  CsvWriter w(temp_path("c.csv"), {"x", "y"});
  CHECK_THROWS(w.row({1.0}));
  CHECK_THROWS(w.row({1.0, 2.0, 3.0}));
  CHECK_THROWS(CsvWriter(temp_path("d.csv"), {}));
}

TEST_CASE("radial csv bins a kernel-like field with r^(n-2) compensation") {
  Grid g = Grid::make(3, 2.0, 1.0 / 8.0);
  Field f(static_cast<size_t>(g.ncells));
  for (std::int64_t c = 0; c < g.ncells; ++c) {
    int idx[3];
    double x[3];
    g.decode(c, idx);
    g.center(idx, x);
    double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    f[static_cast<size_t>(c)] = 1.0 / std::max(r, 1e-9);
  }
  std::string path = temp_path("radial.csv");
  write_radial_csv(path, g, f, 0.5, 1.5, 8);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.substr(0, 2) == "r,");
  int rows = 0;
  double prev_r = 0.0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> cols;
    while (std::getline(ls, cell, ',')) cols.push_back(std::strtod(cell.c_str(), nullptr));
    REQUIRE(cols.size() >= 5);
    CHECK(cols[0] > prev_r);  // bin radii strictly increase
    prev_r = cols[0];
    // compensated column: mean * r^(n-2) should sit near 1 for f = 1/r
    CHECK(cols.back() == doctest::Approx(1.0).epsilon(0.05));
  }
  CHECK(rows == 8);
  CHECK_THROWS(write_radial_csv(temp_path("r2.csv"), g, f, 1.5, 0.5, 8));
  CHECK_THROWS(write_radial_csv(temp_path("r3.csv"), g, f, 0.5, 1.5, 0));
}

TEST_CASE("slice csv walks one cell plane; points csv is a flat dump") {
  Grid g = Grid::make(3, 1.0, 1.0 / 4.0);
  Field f(static_cast<size_t>(g.ncells), 1.5);
  std::string path = temp_path("slice.csv");
  write_slice_csv(path, g, f, 2, 0.0);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);  // header
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == g.cells_per_axis * g.cells_per_axis);
  CHECK_THROWS(write_slice_csv(temp_path("s2.csv"), g, f, 3, 0.0));
  CHECK_THROWS(write_slice_csv(temp_path("s3.csv"), g, f, -1, 0.0));

  std::vector<double> pts = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  write_points_csv(temp_path("pts.csv"), pts, 3);
  std::ifstream pin(temp_path("pts.csv"));
  std::getline(pin, line);  // header
  rows = 0;
  while (std::getline(pin, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
}

TEST_CASE("config parser handles sections, comments, lists, and errors") {
  std::string path = temp_path("good.ini");
  write_text(path,
             "# experiment at desk scale\n"
             "[media]\n"
             "preset = cross_mild\n"
             "dim = 3\n"
             "\n"
             "[domain]\n"
             "r_box = 2.5   # roomy\n"
             "r_source = 0.4\n"
             "r_init = 0.6\n"
             "[grid]\n"
             "h = 0.0625\n"
             "[time]\n"
             "t_final = 1\n"
             "out_times = 0.25, 0.5, 1\n"
             "[output]\n"
             "seed = 99\n");
  ExperimentConfig cfg = parse_config(path);
  CHECK(cfg.media_preset == "cross_mild");
  CHECK(cfg.r_box == 2.5);
  CHECK(cfg.r_source == 0.4);
  CHECK(cfg.h == 0.0625);
  CHECK(cfg.t_final == 1.0);
  REQUIRE(cfg.out_times.size() == 3);
  CHECK(cfg.out_times[1] == 0.5);
  CHECK(cfg.seed == 99);
  // Untouched keys keep defaults.
  CHECK(cfg.steps_per_decade == 24);

  auto expect_error = [&](const std::string& body, const std::string& needle) {
    std::string p = temp_path("bad.ini");
    write_text(p, body);
    try {
      parse_config(p);
      FAIL_CHECK("expected ConfigError for: " << body);
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      CHECK(msg.find(needle) != std::string::npos);
    }
  };
  expect_error("[media]\nwhat = 1\n", "unknown key");
  expect_error("[media\npreset = layered\n", "unterminated section");
  expect_error("preset = layered\n", "outside any [section]");
  expect_error("[media]\npreset\n", "expected key = value");
  expect_error("[grid]\nh = fast\n", "not a number");
  expect_error("[time]\nsteps_per_decade = 2.5\n", "not an integer");
  expect_error("[time]\nout_times = 1,,2\n", "empty element");
  // Errors carry file and line position.
  expect_error("[media]\n\nwhat = 1\n", ":3");
  CHECK_THROWS(parse_config(temp_path("missing.ini")));
}

TEST_CASE("overrides use section.key=value and reject anything else") {
  ExperimentConfig cfg;
  apply_override(cfg, "time.t_final=4");
  CHECK(cfg.t_final == 4.0);
  apply_override(cfg, "media.preset=constant_identity");
  CHECK(cfg.media_preset == "constant_identity");
  apply_override(cfg, "sweep.lambdas=1,27");
  REQUIRE(cfg.lambdas.size() == 2);
  CHECK(cfg.lambdas[1] == 27.0);
  apply_override(cfg, "solver.omega=1.6");
  CHECK(cfg.psor.omega == 1.6);
  CHECK_THROWS(apply_override(cfg, "t_final=4"));
  CHECK_THROWS(apply_override(cfg, "time.t_final"));
  CHECK_THROWS(apply_override(cfg, "time.nope=4"));
}

TEST_CASE("echo and hash are canonical and sensitive to every change") {
  ExperimentConfig cfg;
  std::string echo1 = echo_config(cfg);
  std::string hash1 = config_hash(cfg);
  CHECK(echo_config(cfg) == echo1);
  CHECK(config_hash(cfg) == hash1);
  CHECK(hash1.size() == 16);
  CHECK(echo1.find("media.preset = layered\n") != std::string::npos);
  CHECK(echo1.find("grid.h = 0.0625\n") != std::string::npos);
  CHECK(echo1.find("output.seed = 2026\n") != std::string::npos);

  ExperimentConfig tweaked = cfg;
  tweaked.t_final = 4.0;
  CHECK(config_hash(tweaked) != hash1);
  tweaked = cfg;
  tweaked.seed = 7;
  CHECK(config_hash(tweaked) != hash1);
}

TEST_CASE("validation rejects unresolvable or inconsistent setups") {
  ExperimentConfig good;
  CHECK_NOTHROW(validate_config(good));

  auto expect_invalid = [](void (*mutate)(ExperimentConfig&), const std::string& needle) {
    ExperimentConfig cfg;
    mutate(cfg);
    try {
      validate_config(cfg);
      FAIL_CHECK("expected rejection: " << needle);
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      CHECK(msg.find(needle) != std::string::npos);
    }
  };
  expect_invalid([](ExperimentConfig& c) { c.dim = 2; }, "between 3 and 6");
  expect_invalid([](ExperimentConfig& c) { c.r_init = c.r_source; }, "r_init");
  expect_invalid([](ExperimentConfig& c) { c.r_init = c.r_box + 1; }, "inside the box");
  expect_invalid([](ExperimentConfig& c) { c.r_source = 2.4 * c.h; }, "3 h");
  expect_invalid([](ExperimentConfig& c) { c.out_times = {0.5, 0.25}; }, "increasing");
  expect_invalid([](ExperimentConfig& c) { c.out_times = {9.0}; }, "(0, t_final]");
  expect_invalid([](ExperimentConfig& c) { c.psor.omega = 2.5; }, "omega");
  expect_invalid([](ExperimentConfig& c) { c.lambdas = {1.0, 8.0}; }, "pair up");
  expect_invalid(
      [](ExperimentConfig& c) {
        c.h = 0.15;  // still resolves the source ball, too coarse for the cell
        c.r_init = 0.9;
      },
      "unit cell");
  expect_invalid([](ExperimentConfig& c) { c.barrier_t0 = 0.0; }, "t0");
  expect_invalid([](ExperimentConfig& c) { c.out_root.clear(); }, "root");
}

TEST_CASE("expression media builds the matrix the text describes") {
  std::string path = temp_path("expr.ini");
  write_text(path,
             "[media]\n"
             "preset = expression\n"
             "dim = 3\n"
             "a11 = 2 + sin(2*pi*x1)\n"
             "a12 = 0\n"
             "a13 = 0\n"
             "a22 = 1.5\n"
             "a23 = 0.25\n"
             "a33 = 1\n"
             "g = 2\n");
  ExperimentConfig cfg = parse_config(path);
  CoefficientField media = make_media(cfg);
  double x[3] = {0.25, -0.4, 0.7};
  Eigen::MatrixXd a = media.matrix_at(x);
  CHECK(a(0, 0) == doctest::Approx(3.0).epsilon(1e-12));  // sin(pi/2) = 1
  CHECK(a(1, 1) == doctest::Approx(1.5));
  CHECK(a(1, 2) == doctest::Approx(0.25));
  CHECK(a(2, 1) == doctest::Approx(0.25));  // symmetric fill
  CHECK(a(0, 1) == doctest::Approx(0.0));
  CHECK(media.g(x) == doctest::Approx(2.0));
  MediaValidation mv = validate_media(media, 512, 3);
  CHECK(mv.pass);
  CHECK(mv.max_periodicity_residual <= 1e-12);

  // Missing diagonal entry is caught when the media is built.
  std::string broken = temp_path("expr_bad.ini");
  write_text(broken,
             "[media]\n"
             "preset = expression\n"
             "dim = 3\n"
             "a11 = 1\n"
             "a12 = 0\n"
             "a13 = 0\n"
             "a22 = 1\n"
             "a23 = 0\n"
             "g = 1\n");
  ExperimentConfig bad = parse_config(broken);
  CHECK_THROWS(make_media(bad));

  // aij before dim is ambiguous and rejected at parse time.
  std::string disorder = temp_path("expr_order.ini");
  write_text(disorder,
             "[media]\n"
             "preset = expression\n"
             "a11 = 1\n"
             "dim = 3\n");
  CHECK_THROWS(parse_config(disorder));

  // Entries outside the upper triangle are rejected.
  std::string lower = temp_path("expr_lower.ini");
  write_text(lower,
             "[media]\n"
             "preset = expression\n"
             "dim = 3\n"
             "a21 = 1\n");
  CHECK_THROWS(parse_config(lower));
}

TEST_CASE("every named preset yields valid media") {
  for (const std::string name :
       {"layered", "cross_mild", "constant_identity", "constant_aniso"}) {
    ExperimentConfig cfg;
    cfg.media_preset = name;
    CoefficientField media = make_media(cfg);
    MediaValidation mv = validate_media(media, 512, 1);
    CHECK_MESSAGE(mv.pass, name << ": " << mv.message);
  }
  ExperimentConfig cfg;
  cfg.media_preset = "molten_unobtanium";
  CHECK_THROWS(make_media(cfg));
}

TEST_CASE("support bound grows like t^(1/n) and dominates the seed") {
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(3, 3);
  double r0 = support_bound_estimate(q, 1.0, 0.5, 0.75, 0.0);
  CHECK(r0 >= 0.75);  // never below the initial radius
  double r1 = support_bound_estimate(q, 1.0, 0.5, 0.75, 1.0);
  double r8 = support_bound_estimate(q, 1.0, 0.5, 0.75, 8.0);
  double r64 = support_bound_estimate(q, 1.0, 0.5, 0.75, 64.0);
  CHECK(r1 < r8);
  CHECK(r8 < r64);
  // Once the seed term is negligible the growth is t^(1/3): doubling ratio -> 2^(1/3).
  double r512 = support_bound_estimate(q, 1.0, 0.5, 0.75, 512.0);
  CHECK(r512 / r64 == doctest::Approx(2.0).epsilon(0.02));
  // Slower conductors spread less.
  double rs = support_bound_estimate(0.5 * q, 1.0, 0.5, 0.75, 64.0);
  CHECK(rs < r64);
  // Heavier latent heat (larger L) spreads less.
  double rl = support_bound_estimate(q, 4.0, 0.5, 0.75, 64.0);
  CHECK(rl < r64);
}
