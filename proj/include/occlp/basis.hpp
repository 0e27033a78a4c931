#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "occlp/system.hpp"

namespace occlp {

// s = (y - center) ./ half_width; maps a bounding box onto [-1, 1]^m.
struct AffineScaling {
  Eigen::VectorXd center;
  Eigen::VectorXd half_width;

  static AffineScaling identity(int dim) {
    return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
  }
  static AffineScaling from_box(const BoxShape& box) {
    return {0.5 * (box.lower + box.upper), 0.5 * (box.upper - box.lower)};
  }
};

// Monomials s^alpha with 1 <= |alpha| <= max_degree in graded lexicographic order.
// The constant monomial is left out: its flow and initial-condition rows vanish identically.
struct BasisSpec {
  int dim = 0;
  int max_degree = 0;
  AffineScaling scaling;
  Eigen::MatrixXi exponents;  // one multi-index per row

  Eigen::Index size() const { return exponents.rows(); }
};

BasisSpec enumerate_basis(int dim, int max_degree);
BasisSpec enumerate_basis(int dim, int max_degree, const AffineScaling& scaling);

namespace detail {
inline double int_pow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

inline void check_index(const BasisSpec& basis, Eigen::Index index) {
  if (index < 0 || index >= basis.size()) throw std::out_of_range("basis index out of range");
}
}  // namespace detail

template <typename Derived>
double eval_phi(const BasisSpec& basis, Eigen::Index index, const Eigen::MatrixBase<Derived>& y) {
  detail::check_index(basis, index);
  double value = 1.0;
  for (int i = 0; i < basis.dim; ++i) {
    const double s = (y[i] - basis.scaling.center[i]) / basis.scaling.half_width[i];
    value *= detail::int_pow(s, basis.exponents(index, i));
  }
  return value;
}

template <typename Derived>
Eigen::VectorXd eval_grad_phi(const BasisSpec& basis, Eigen::Index index, const Eigen::MatrixBase<Derived>& y) {
  detail::check_index(basis, index);
  Eigen::VectorXd s(basis.dim);
  for (int i = 0; i < basis.dim; ++i) s[i] = (y[i] - basis.scaling.center[i]) / basis.scaling.half_width[i];
  Eigen::VectorXd grad(basis.dim);
  for (int j = 0; j < basis.dim; ++j) {
    const int ej = basis.exponents(index, j);
    if (ej == 0) {
      grad[j] = 0.0;
      continue;
    }
    double g = ej * detail::int_pow(s[j], ej - 1) / basis.scaling.half_width[j];
    for (int i = 0; i < basis.dim; ++i) {
      if (i != j) g *= detail::int_pow(s[i], basis.exponents(index, i));
    }
    grad[j] = g;
  }
  return grad;
}

// All basis values / gradients at one point (gradient row b is grad phi_b).
Eigen::VectorXd phi_values(const BasisSpec& basis, const VectorRef& y);
Eigen::MatrixXd phi_gradients(const BasisSpec& basis, const VectorRef& y);

// Basis function combination sum_b coeffs[b] * phi_b and its gradient.
double combination_value(const BasisSpec& basis, const VectorRef& coeffs, const VectorRef& y);
Eigen::VectorXd combination_gradient(const BasisSpec& basis, const VectorRef& coeffs, const VectorRef& y);

}  // namespace occlp
