#pragma once

#include <cstdint>
#include <vector>

#include "stefan/media.hpp"

namespace stefan {

using Field = std::vector<double>;

// Uniform cube grid centered at the origin. cells_per_axis is odd so one cell
// center sits exactly at 0; centers span [-r_box, r_box] along each axis.
struct Grid {
  int dim = 3;
  int cells_per_axis = 0;
  double h = 0.0;
  double r_box = 0.0;
  std::int64_t ncells = 0;
  std::vector<std::int64_t> stride;

  // Picks the largest odd cell count whose spacing is <= h_target and divides
  // r_box exactly; the realized h is echoed in the struct.
  static Grid make(int dim, double r_box, double h_target);

  std::int64_t encode(const int* idx) const {
    std::int64_t c = 0;
    for (int d = 0; d < dim; ++d) c += stride[static_cast<size_t>(d)] * idx[d];
    return c;
  }
  void decode(std::int64_t c, int* idx) const {
    for (int d = dim - 1; d >= 0; --d) {
      idx[d] = static_cast<int>(c / stride[static_cast<size_t>(d)]);
      c -= stride[static_cast<size_t>(d)] * idx[d];
    }
  }
  double coord(int i) const { return -r_box + h * i; }
  void center(const int* idx, double* x) const {
    for (int d = 0; d < dim; ++d) x[d] = coord(idx[d]);
  }
  double radius(const int* idx) const;
  bool on_outer_layer(const int* idx) const {
    for (int d = 0; d < dim; ++d)
      if (idx[d] == 0 || idx[d] == cells_per_axis - 1) return true;
    return false;
  }
  Field make_field(double fill = 0.0) const { return Field(static_cast<size_t>(ncells), fill); }
};

enum class CellKind : unsigned char { kFree = 0, kSource = 1, kOuter = 2 };

struct DomainMasks {
  std::vector<CellKind> kind;
  std::int64_t n_source = 0;
  std::int64_t n_outer = 0;
  std::int64_t n_free = 0;
};

// Source set: closed ball of radius r_source at the origin (pass 0 for none).
// Outer set: the outermost cell layer.
DomainMasks build_masks(const Grid& g, double r_source);

// Divergence-form operator L u = D_j(a_ij D_i u) discretized from the energy
//   sum_k h^n a_kk(face) dk(u) dk(w) + sum_{i<j} h^n a_ij(corner)
//       [di(u) dj(w) + dj(u) di(w)]
// with two-point differences across axis faces and 2x2 averaged differences
// at cell corners of each (i,j) plane. Diagonal coefficients are sampled at
// face midpoints, off-diagonal ones at corner midpoints, both at shift * x,
// so a rescaled problem assembles with shift = lambda^(1/n). The induced
// matrix is symmetric by construction; for A = I it reduces to the standard
// (2n+1)-point Laplacian.
class StencilOperator {
 public:
  StencilOperator() = default;
  StencilOperator(const Grid& grid, const CoefficientField& media, double shift = 1.0);

  // out = (-L u) at cells strictly inside the outer layer; 0 on the layer.
  void apply_neg(const Field& u, Field& out) const;
  // Same value for a single interior cell.
  double apply_neg_row(const Field& u, std::int64_t c) const;
  double diag(std::int64_t c) const { return diag_[static_cast<size_t>(c)]; }

  const Grid& grid() const { return grid_; }
  double shift() const { return shift_; }
  bool has_cross_terms() const { return !cross_.empty(); }

 private:
  // By value: the operator outlives whatever grid it was built from.
  Grid grid_;
  int dim_ = 0;
  double shift_ = 1.0;
  double inv_h2_ = 0.0;
  double inv_2h_ = 0.0;
  // face_[k][c] = a_kk at the minus-face of cell c along axis k.
  std::vector<std::vector<double>> face_;
  struct CrossPlane {
    int i, j;
    std::int64_t si, sj;
    std::vector<double> corner;  // a_ij at the (+,+) corner of cell c in the (i,j) plane
  };
  std::vector<CrossPlane> cross_;
  std::vector<double> diag_;
};

// Multilinear interpolation of a cell-centered field; clamps to the box.
double interpolate(const Grid& g, const Field& u, const double* x);

double linf_norm(const Field& u);
double linf_diff(const Field& a, const Field& b);

}  // namespace stefan
