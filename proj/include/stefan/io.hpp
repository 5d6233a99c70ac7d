#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "stefan/grid.hpp"

namespace stefan {

// Shortest round-trip decimal form (printf %.17g), locale-independent.
std::string format_g17(double v);

void ensure_dir(const std::string& path);

// Flat binary field: magic, dim, cells_per_axis, h, r_box, then the cells in
// encoding order.
void write_field(const std::string& path, const Grid& g, const Field& f);
struct LoadedField {
  Grid grid;
  Field data;
};
LoadedField read_field(const std::string& path);

// Deterministic CSV: header once, numeric cells rendered with format_g17.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<double>& values);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::FILE* f_ = nullptr;
  size_t columns_ = 0;
};

// Shell-binned radial profile: radius, mean, min, max, count per bin, plus
// mean * r^(n-2) to expose kernel-type decay.
void write_radial_csv(const std::string& path, const Grid& g, const Field& f,
                      double r_lo, double r_hi, int bins);

// Axis-aligned slice through the plane axis = coord (snapped to the nearest
// cell layer): one row per cell with its center coordinates and value.
void write_slice_csv(const std::string& path, const Grid& g, const Field& f, int axis,
                     double coord);

// Flat point list (dim * count), one point per row.
void write_points_csv(const std::string& path, const std::vector<double>& pts, int dim);

}  // namespace stefan
