#include "stefan/media.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "stefan/rng.hpp"

namespace stefan {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

CoefficientField identity_media(int dim) {
  CoefficientField f;
  f.dim = dim;
  f.name = "constant_identity";
  f.entry = [](int i, int j, const double*) { return i == j ? 1.0 : 0.0; };
  f.g = [](const double*) { return 1.0; };
  f.alpha = 1.0;
  f.beta = 1.0;
  f.g_lower = 1.0;
  f.g_upper = 1.0;
  f.constant_in_space = true;
  HomogenizedReference ref;
  ref.q = Eigen::MatrixXd::Identity(dim, dim);
  ref.l_avg = 1.0;
  f.known = ref;
  return f;
}

CoefficientField constant_aniso_media(int dim) {
  CoefficientField f;
  f.dim = dim;
  f.name = "constant_aniso";
  f.entry = [](int i, int j, const double*) {
    if (i != j) return 0.0;
    return i == 0 ? 2.0 : 1.0;
  };
  f.g = [](const double*) { return 1.0; };
  f.alpha = 1.0;
  f.beta = 2.0;
  f.g_lower = 1.0;
  f.g_upper = 1.0;
  f.constant_in_space = true;
  HomogenizedReference ref;
  ref.q = Eigen::MatrixXd::Identity(dim, dim);
  ref.q(0, 0) = 2.0;
  ref.l_avg = 1.0;
  f.known = ref;
  return f;
}

// a(x) = (2 + sin(2 pi x1)) I, g = 2 + sin(2 pi x1). Effective tensor is the
// harmonic mean sqrt(3) along x1 and the arithmetic mean 2 across it;
// the averaged 1/g is 1/sqrt(3).
CoefficientField layered_media(int dim) {
  CoefficientField f;
  f.dim = dim;
  f.name = "layered";
  f.entry = [](int i, int j, const double* x) {
    if (i != j) return 0.0;
    return 2.0 + std::sin(kTwoPi * x[0]);
  };
  f.g = [](const double* x) { return 2.0 + std::sin(kTwoPi * x[0]); };
  f.alpha = 1.0;
  f.beta = 3.0;
  f.g_lower = 1.0;
  f.g_upper = 3.0;
  f.constant_in_space = false;
  HomogenizedReference ref;
  const double sqrt3 = std::sqrt(3.0);
  ref.q = 2.0 * Eigen::MatrixXd::Identity(dim, dim);
  ref.q(0, 0) = sqrt3;
  ref.l_avg = 1.0 / sqrt3;
  f.known = ref;
  return f;
}

// Mild off-diagonal coupling in the (x1,x2) plane; g oscillates in x2 with
// cell average of 1/g exactly 1. Off-diagonal amplitude 0.25 <= 0.4 * alpha.
CoefficientField cross_mild_media(int dim) {
  CoefficientField f;
  f.dim = dim;
  f.name = "cross_mild";
  f.entry = [](int i, int j, const double* x) {
    if (i == j) return 1.0;
    if ((i == 0 && j == 1) || (i == 1 && j == 0))
      return 0.25 * std::sin(kTwoPi * x[0]) * std::sin(kTwoPi * x[1]);
    return 0.0;
  };
  f.g = [](const double* x) { return 1.0 / (1.0 + 0.4 * std::cos(kTwoPi * x[1])); };
  f.alpha = 0.75;
  f.beta = 1.25;
  f.g_lower = 1.0 / 1.4;
  f.g_upper = 1.0 / 0.6;
  f.constant_in_space = false;
  f.offdiag_pairs = {{0, 1}};
  HomogenizedReference ref;  // Q unknown; the averaged 1/g is exact.
  ref.l_avg = 1.0;
  f.known = ref;
  return f;
}

}  // namespace

std::vector<std::string> media_preset_names() {
  return {"constant_identity", "constant_aniso", "layered", "cross_mild"};
}

CoefficientField make_media_preset(const std::string& name, int dim) {
  if (name == "constant_identity") return identity_media(dim);
  if (name == "constant_aniso") return constant_aniso_media(dim);
  if (name == "layered") return layered_media(dim);
  if (name == "cross_mild") return cross_mild_media(dim);
  throw std::invalid_argument("unknown media preset: " + name);
}

CoefficientField make_constant_media(const Eigen::MatrixXd& a0, double g0) {
  const int dim = static_cast<int>(a0.rows());
  if (a0.cols() != dim) throw std::invalid_argument("coefficient matrix must be square");
  if ((a0 - a0.transpose()).cwiseAbs().maxCoeff() > 1e-14)
    throw std::invalid_argument("coefficient matrix must be symmetric");
  if (g0 <= 0.0) throw std::invalid_argument("g must be positive");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a0);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo <= 0.0) throw std::invalid_argument("coefficient matrix must be positive definite");

  auto a_copy = std::make_shared<Eigen::MatrixXd>(a0);
  CoefficientField f;
  f.dim = dim;
  f.name = "constant_custom";
  f.entry = [a_copy](int i, int j, const double*) { return (*a_copy)(i, j); };
  f.g = [g0](const double*) { return g0; };
  f.alpha = lo;
  f.beta = hi;
  f.g_lower = g0;
  f.g_upper = g0;
  f.constant_in_space = true;
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j)
      if (std::fabs(a0(i, j)) > 0.0) f.offdiag_pairs.emplace_back(i, j);
  HomogenizedReference ref;
  ref.q = a0;
  ref.l_avg = 1.0 / g0;
  f.known = ref;
  return f;
}

CoefficientField make_expression_media(int dim,
                                       const std::vector<std::vector<std::string>>& a_entries,
                                       const std::string& g_text) {
  if (static_cast<int>(a_entries.size()) != dim)
    throw std::invalid_argument("need one row of coefficient expressions per dimension");

  auto exprs = std::make_shared<std::vector<std::vector<Expr>>>(
      dim, std::vector<Expr>(static_cast<size_t>(dim)));
  for (int i = 0; i < dim; ++i) {
    // Row i lists the upper triangle from the diagonal: a_{i,i} .. a_{i,dim}.
    if (static_cast<int>(a_entries[static_cast<size_t>(i)].size()) != dim - i)
      throw std::invalid_argument("coefficient row " + std::to_string(i + 1) + " must have " +
                                  std::to_string(dim - i) + " entries (diagonal through a" +
                                  std::to_string(i + 1) + std::to_string(dim) + ")");
    for (int j = i; j < dim; ++j) {
      const std::string& text = a_entries[static_cast<size_t>(i)][static_cast<size_t>(j - i)];
      if (!text.empty()) {
        Expr e = Expr::parse(text);
        if (e.max_axis() >= dim)
          throw std::invalid_argument("entry a" + std::to_string(i + 1) + std::to_string(j + 1) +
                                      " uses a coordinate beyond the grid dimension");
        // A literal zero off the diagonal is the same as leaving the slot blank;
        // keeping it would register a phantom coupling pair.
        bool zero_constant = false;
        if (j > i && e.max_axis() < 0) {
          const std::vector<double> origin(static_cast<size_t>(dim), 0.0);
          zero_constant = (e.eval(origin.data(), dim) == 0.0);
        }
        if (!zero_constant) (*exprs)[static_cast<size_t>(i)][static_cast<size_t>(j)] = e;
      }
    }
  }
  auto g_expr = std::make_shared<Expr>(Expr::parse(g_text));
  if (g_expr->max_axis() >= dim)
    throw std::invalid_argument("g uses a coordinate beyond the grid dimension");

  CoefficientField f;
  f.dim = dim;
  f.name = "expression";
  f.entry = [exprs, dim](int i, int j, const double* x) {
    if (i > j) std::swap(i, j);
    const Expr& e = (*exprs)[static_cast<size_t>(i)][static_cast<size_t>(j)];
    return e.empty() ? 0.0 : e.eval(x, dim);
  };
  f.g = [g_expr, dim](const double* x) { return g_expr->eval(x, dim); };
  f.constant_in_space = false;
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j)
      if (!(*exprs)[static_cast<size_t>(i)][static_cast<size_t>(j)].empty())
        f.offdiag_pairs.emplace_back(i, j);

  // Declared bounds are filled by probing; start from the empirical sweep.
  MediaValidation v = validate_media(f);
  f.alpha = v.rayleigh_min;
  f.beta = v.rayleigh_max;
  f.g_lower = v.g_min;
  f.g_upper = v.g_max;
  return f;
}

MediaValidation validate_media(const CoefficientField& field, int n_samples, std::uint64_t seed) {
  MediaValidation out;
  const int dim = field.dim;
  std::mt19937_64 gen(seed);
  std::vector<double> x(static_cast<size_t>(dim));
  std::vector<double> xs(static_cast<size_t>(dim));
  Eigen::VectorXd xi(dim);

  out.rayleigh_min = 1e300;
  out.rayleigh_max = -1e300;
  out.g_min = 1e300;
  out.g_max = -1e300;
  out.g_rayleigh_min = 1e300;

  for (int s = 0; s < n_samples; ++s) {
    halton_point(static_cast<std::uint64_t>(s), dim, x.data());
    // Spread beyond the unit cell so periodicity is actually exercised.
    for (int d = 0; d < dim; ++d) x[static_cast<size_t>(d)] = 4.0 * x[static_cast<size_t>(d)] - 2.0;

    Eigen::MatrixXd a = field.matrix_at(x.data());
    out.max_symmetry_residual =
        std::max(out.max_symmetry_residual, (a - a.transpose()).cwiseAbs().maxCoeff());

    for (int d = 0; d < dim; ++d) {
      xs = x;
      xs[static_cast<size_t>(d)] += 1.0;
      Eigen::MatrixXd ap = field.matrix_at(xs.data());
      out.max_periodicity_residual =
          std::max(out.max_periodicity_residual, (a - ap).cwiseAbs().maxCoeff());
      out.max_periodicity_residual =
          std::max(out.max_periodicity_residual, std::fabs(field.g(x.data()) - field.g(xs.data())));
    }

    const double gv = field.g(x.data());
    out.g_min = std::min(out.g_min, gv);
    out.g_max = std::max(out.g_max, gv);

    double norm2 = 0.0;
    for (int d = 0; d < dim; ++d) {
      xi(d) = 2.0 * uniform01(gen) - 1.0;
      norm2 += xi(d) * xi(d);
    }
    if (norm2 < 1e-12) { xi.setZero(); xi(0) = 1.0; norm2 = 1.0; }
    const double rayleigh = xi.dot(a * xi) / norm2;
    out.rayleigh_min = std::min(out.rayleigh_min, rayleigh);
    out.rayleigh_max = std::max(out.rayleigh_max, rayleigh);
    out.g_rayleigh_min = std::min(out.g_rayleigh_min, gv * rayleigh);
  }

  const double tol = 1e-10;
  out.pass = out.max_symmetry_residual <= tol && out.max_periodicity_residual <= tol &&
             out.rayleigh_min > 0.0 && out.g_min > 0.0;
  if (!out.pass) {
    out.message = "media validation failed: symmetry " + std::to_string(out.max_symmetry_residual) +
                  ", periodicity " + std::to_string(out.max_periodicity_residual) +
                  ", rayleigh_min " + std::to_string(out.rayleigh_min) +
                  ", g_min " + std::to_string(out.g_min);
  }
  return out;
}

}  // namespace stefan
