#include "occlp/basis.hpp"

#include <functional>

namespace occlp {

namespace {

// Power table P(i, e) = s_i^e and its derivative table.
struct PowerTable {
  Eigen::MatrixXd value;
  Eigen::MatrixXd deriv;
};

PowerTable powers(const BasisSpec& basis, const VectorRef& y) {
  if (y.size() != basis.dim) throw std::invalid_argument("basis evaluation: dimension mismatch");
  PowerTable t{Eigen::MatrixXd(basis.dim, basis.max_degree + 1), Eigen::MatrixXd(basis.dim, basis.max_degree + 1)};
  for (int i = 0; i < basis.dim; ++i) {
    const double s = (y[i] - basis.scaling.center[i]) / basis.scaling.half_width[i];
    t.value(i, 0) = 1.0;
    t.deriv(i, 0) = 0.0;
    for (int e = 1; e <= basis.max_degree; ++e) {
      t.value(i, e) = t.value(i, e - 1) * s;
      t.deriv(i, e) = e * t.value(i, e - 1) / basis.scaling.half_width[i];
    }
  }
  return t;
}

}  // namespace

BasisSpec enumerate_basis(int dim, int max_degree) {
  return enumerate_basis(dim, max_degree, AffineScaling::identity(dim > 0 ? dim : 1));
}

BasisSpec enumerate_basis(int dim, int max_degree, const AffineScaling& scaling) {
  if (dim < 1) throw std::invalid_argument("basis dimension must be >= 1");
  if (max_degree < 1) throw std::invalid_argument("max_degree must be >= 1");
  if (scaling.center.size() != dim || scaling.half_width.size() != dim) {
    throw std::invalid_argument("basis scaling dimension mismatch");
  }
  if ((scaling.half_width.array() <= 0.0).any()) throw std::invalid_argument("basis scaling must be invertible");

  std::vector<Eigen::VectorXi> rows;
  Eigen::VectorXi alpha(dim);
  // Exponents of total degree `remaining` over coordinates [pos, dim), first coordinate largest first.
  std::function<void(int, int)> fill = [&](int pos, int remaining) {
    if (pos == dim - 1) {
      alpha[pos] = remaining;
      rows.push_back(alpha);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      alpha[pos] = e;
      fill(pos + 1, remaining - e);
    }
  };
  for (int degree = 1; degree <= max_degree; ++degree) fill(0, degree);

  BasisSpec basis;
  basis.dim = dim;
  basis.max_degree = max_degree;
  basis.scaling = scaling;
  basis.exponents.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) basis.exponents.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  return basis;
}

Eigen::VectorXd phi_values(const BasisSpec& basis, const VectorRef& y) {
  const auto t = powers(basis, y);
  Eigen::VectorXd out(basis.size());
  for (Eigen::Index b = 0; b < basis.size(); ++b) {
    double v = 1.0;
    for (int i = 0; i < basis.dim; ++i) v *= t.value(i, basis.exponents(b, i));
    out[b] = v;
  }
  return out;
}

Eigen::MatrixXd phi_gradients(const BasisSpec& basis, const VectorRef& y) {
  const auto t = powers(basis, y);
  Eigen::MatrixXd out(basis.size(), basis.dim);
  for (Eigen::Index b = 0; b < basis.size(); ++b) {
    for (int j = 0; j < basis.dim; ++j) {
      double g = t.deriv(j, basis.exponents(b, j));
      for (int i = 0; i < basis.dim; ++i) {
        if (i != j) g *= t.value(i, basis.exponents(b, i));
      }
      out(b, j) = g;
    }
  }
  return out;
}

double combination_value(const BasisSpec& basis, const VectorRef& coeffs, const VectorRef& y) {
  if (coeffs.size() != basis.size()) throw std::invalid_argument("coefficient count does not match basis");
  return coeffs.dot(phi_values(basis, y));
}

Eigen::VectorXd combination_gradient(const BasisSpec& basis, const VectorRef& coeffs, const VectorRef& y) {
  if (coeffs.size() != basis.size()) throw std::invalid_argument("coefficient count does not match basis");
  return phi_gradients(basis, y).transpose() * coeffs;
}

}  // namespace occlp
