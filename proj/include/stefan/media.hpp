#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stefan/expr.hpp"

namespace stefan {

// Known homogenized data attached to oracle presets.
struct HomogenizedReference {
  Eigen::MatrixXd q;       // effective tensor (empty if unknown)
  double l_avg = -1.0;     // cell average of 1/g (negative if unknown)
};

// Periodic coefficient pair (A, g) evaluated on demand. A is symmetric with
// entries 1-periodic in every coordinate; g is scalar, same periodicity.
struct CoefficientField {
  int dim = 3;
  std::string name;
  std::function<double(int, int, const double*)> entry;  // a_ij(x)
  std::function<double(const double*)> g;

  // Declared bounds; validate_media probes them empirically.
  double alpha = 0.0;   // lower ellipticity
  double beta = 0.0;    // upper ellipticity
  double g_lower = 0.0;
  double g_upper = 0.0;

  bool constant_in_space = false;
  // Pairs (i,j), i<j, with a_ij not identically zero. Empty means A diagonal.
  std::vector<std::pair<int, int>> offdiag_pairs;

  std::optional<HomogenizedReference> known;

  Eigen::MatrixXd matrix_at(const double* x) const {
    Eigen::MatrixXd a(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) a(i, j) = entry(i, j, x);
    return a;
  }
};

struct MediaValidation {
  double max_symmetry_residual = 0.0;
  double max_periodicity_residual = 0.0;
  double rayleigh_min = 0.0;       // min over samples of xi'A xi / |xi|^2
  double rayleigh_max = 0.0;
  double g_min = 0.0;
  double g_max = 0.0;
  double g_rayleigh_min = 0.0;     // min of g * xi'A xi / |xi|^2
  bool pass = false;
  std::string message;
};

// Shipped presets: constant_identity, constant_aniso, layered, cross_mild.
std::vector<std::string> media_preset_names();
CoefficientField make_media_preset(const std::string& name, int dim = 3);

// Constant-coefficient medium from an explicit SPD matrix (tests, stencil checks).
CoefficientField make_constant_media(const Eigen::MatrixXd& a0, double g0 = 1.0);

// Custom medium from expression strings: entries[i][j-i] upper triangle, g text.
CoefficientField make_expression_media(int dim,
                                       const std::vector<std::vector<std::string>>& a_entries,
                                       const std::string& g_text);

// Probes symmetry, 1-periodicity, ellipticity, and bounds on g over
// quasi-random sample points and random directions. Throws nothing; the
// verdict and worst residuals are in the returned struct.
MediaValidation validate_media(const CoefficientField& field,
                               int n_samples = 4096,
                               std::uint64_t seed = 2026);

}  // namespace stefan
