#include "stefan/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>

namespace stefan {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'F', 'L', 'D', '0', '0', '1'};

[[noreturn]] void fail(const std::string& what, const std::string& path) {
  throw std::runtime_error(what + ": " + path);
}

}  // namespace

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) fail("cannot create directory", path);
}

void write_field(const std::string& path, const Grid& g, const Field& f) {
  if (static_cast<std::int64_t>(f.size()) != g.ncells)
    throw std::invalid_argument("field size does not match the grid");
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) fail("cannot open for writing", path);
  std::int64_t dim = g.dim, cells = g.cells_per_axis;
  bool ok = std::fwrite(kMagic, 1, 8, fp) == 8 &&
            std::fwrite(&dim, sizeof dim, 1, fp) == 1 &&
            std::fwrite(&cells, sizeof cells, 1, fp) == 1 &&
            std::fwrite(&g.h, sizeof g.h, 1, fp) == 1 &&
            std::fwrite(&g.r_box, sizeof g.r_box, 1, fp) == 1 &&
            std::fwrite(f.data(), sizeof(double), f.size(), fp) == f.size();
  if (std::fclose(fp) != 0 || !ok) fail("write failed", path);
}

LoadedField read_field(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) fail("cannot open for reading", path);
  char magic[8];
  std::int64_t dim = 0, cells = 0;
  double h = 0, r_box = 0;
  bool ok = std::fread(magic, 1, 8, fp) == 8 && std::memcmp(magic, kMagic, 8) == 0 &&
            std::fread(&dim, sizeof dim, 1, fp) == 1 &&
            std::fread(&cells, sizeof cells, 1, fp) == 1 &&
            std::fread(&h, sizeof h, 1, fp) == 1 &&
            std::fread(&r_box, sizeof r_box, 1, fp) == 1;
  if (!ok || dim < 1 || dim > 8 || cells < 3) {
    std::fclose(fp);
    fail("not a field file", path);
  }
  LoadedField lf;
  lf.grid.dim = static_cast<int>(dim);
  lf.grid.cells_per_axis = static_cast<int>(cells);
  lf.grid.h = h;
  lf.grid.r_box = r_box;
  lf.grid.ncells = 1;
  lf.grid.stride.assign(static_cast<size_t>(dim), 1);
  for (int d = 0; d < dim; ++d) {
    lf.grid.stride[static_cast<size_t>(d)] = lf.grid.ncells;
    lf.grid.ncells *= cells;
  }
  lf.data.resize(static_cast<size_t>(lf.grid.ncells));
  ok = std::fread(lf.data.data(), sizeof(double), lf.data.size(), fp) == lf.data.size();
  std::fclose(fp);
  if (!ok) fail("truncated field file", path);
  return lf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
  if (header.empty()) throw std::invalid_argument("csv needs a header");
  f_ = std::fopen(path.c_str(), "wb");
  if (!f_) fail("cannot open for writing", path);
  for (size_t i = 0; i < header.size(); ++i)
    std::fprintf(f_, "%s%s", header[i].c_str(), i + 1 == header.size() ? "\n" : ",");
}

CsvWriter::~CsvWriter() {
  if (f_) std::fclose(f_);
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_) throw std::invalid_argument("csv row width mismatch");
  for (size_t i = 0; i < values.size(); ++i)
    std::fprintf(f_, "%s%s", format_g17(values[i]).c_str(),
                 i + 1 == values.size() ? "\n" : ",");
}

void write_radial_csv(const std::string& path, const Grid& g, const Field& f, double r_lo,
                      double r_hi, int bins) {
  if (bins < 1 || !(r_hi > r_lo)) throw std::invalid_argument("bad radial binning");
  std::vector<double> sum(static_cast<size_t>(bins), 0.0);
  std::vector<double> mn(static_cast<size_t>(bins), 1e300);
  std::vector<double> mx(static_cast<size_t>(bins), -1e300);
  std::vector<std::int64_t> cnt(static_cast<size_t>(bins), 0);
  int idx[8];
  double x[8];
  for (std::int64_t c = 0; c < g.ncells; ++c) {
    g.decode(c, idx);
    g.center(idx, x);
    double r = 0.0;
    for (int d = 0; d < g.dim; ++d) r += x[d] * x[d];
    r = std::sqrt(r);
    if (r < r_lo || r >= r_hi) continue;
    int b = static_cast<int>((r - r_lo) / (r_hi - r_lo) * bins);
    b = std::min(b, bins - 1);
    size_t sb = static_cast<size_t>(b);
    double v = f[static_cast<size_t>(c)];
    sum[sb] += v;
    mn[sb] = std::min(mn[sb], v);
    mx[sb] = std::max(mx[sb], v);
    ++cnt[sb];
  }
  CsvWriter csv(path, {"r", "mean", "min", "max", "count", "mean_r_pow"});
  for (int b = 0; b < bins; ++b) {
    size_t sb = static_cast<size_t>(b);
    if (cnt[sb] == 0) continue;
    double r = r_lo + (b + 0.5) * (r_hi - r_lo) / bins;
    double mean = sum[sb] / cnt[sb];
    csv.row({r, mean, mn[sb], mx[sb], static_cast<double>(cnt[sb]),
             mean * std::pow(r, g.dim - 2.0)});
  }
}

void write_slice_csv(const std::string& path, const Grid& g, const Field& f, int axis,
                     double coord) {
  if (axis < 0 || axis >= g.dim) throw std::invalid_argument("slice axis out of range");
  int layer = static_cast<int>(std::lround((coord + g.r_box) / g.h));
  layer = std::max(0, std::min(g.cells_per_axis - 1, layer));
  std::vector<std::string> header;
  for (int d = 0; d < g.dim; ++d) header.push_back("x" + std::to_string(d + 1));
  header.push_back("value");
  CsvWriter csv(path, header);
  int idx[8];
  double x[8];
  std::vector<double> row(static_cast<size_t>(g.dim) + 1);
  for (std::int64_t c = 0; c < g.ncells; ++c) {
    g.decode(c, idx);
    if (idx[axis] != layer) continue;
    g.center(idx, x);
    for (int d = 0; d < g.dim; ++d) row[static_cast<size_t>(d)] = x[d];
    row[static_cast<size_t>(g.dim)] = f[static_cast<size_t>(c)];
    csv.row(row);
  }
}

void write_points_csv(const std::string& path, const std::vector<double>& pts, int dim) {
  std::vector<std::string> header;
  for (int d = 0; d < dim; ++d) header.push_back("x" + std::to_string(d + 1));
  CsvWriter csv(path, header);
  std::vector<double> row(static_cast<size_t>(dim));
  size_t count = pts.size() / static_cast<size_t>(dim);
  for (size_t i = 0; i < count; ++i) {
    for (int d = 0; d < dim; ++d)
      row[static_cast<size_t>(d)] = pts[i * static_cast<size_t>(dim) + static_cast<size_t>(d)];
    csv.row(row);
  }
}

}  // namespace stefan
