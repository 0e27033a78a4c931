#include "occlp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace occlp {

TestFunctionSet make_test_functions(const BasisSpec& basis, const Grid& grid, const SystemSpec& spec, int samples) {
  if (basis.dim != spec.dim_state) throw std::invalid_argument("test functions: basis/system dimension mismatch");
  const Eigen::Index nf = basis.size() + 1;
  Eigen::VectorXd sup = Eigen::VectorXd::Zero(nf);
  sup[0] = 1.0;
  auto absorb = [&](const VectorRef& y) {
    sup.tail(basis.size()) = sup.tail(basis.size()).cwiseMax(phi_values(basis, y).cwiseAbs());
  };
  for (Eigen::Index a = 0; a < grid.size(); ++a) absorb(grid.states().col(a));
  if (samples > 0) {
    const StateControlSamples s = sample_state_controls(spec, samples);
    for (Eigen::Index i = 0; i < s.states.cols(); ++i) absorb(s.states.col(i));
    for (const auto& p : sample_boundary(spec.region, samples / 4 + 1)) absorb(p.state);
  }
  for (Eigen::Index j = 0; j < nf; ++j) {
    if (!(sup[j] > 0.0)) throw std::runtime_error("test functions: a basis function vanishes on the region");
  }

  TestFunctionSet tf;
  tf.max_degree = basis.max_degree;
  tf.sup_norms = sup;
  tf.grid_fingerprint = grid.fingerprint();
  tf.values.resize(grid.size(), nf);
  for (Eigen::Index a = 0; a < grid.size(); ++a) {
    tf.values(a, 0) = 1.0;
    tf.values.row(a).tail(basis.size()) = phi_values(basis, grid.states().col(a)).cwiseQuotient(sup.tail(basis.size())).transpose();
  }
  return tf;
}

double rho_hat(const DiscreteMeasure& g1, const DiscreteMeasure& g2, const TestFunctionSet& tf) {
  if (g1.grid_fingerprint != tf.grid_fingerprint || g2.grid_fingerprint != tf.grid_fingerprint ||
      g1.weights.size() != tf.values.rows() || g2.weights.size() != tf.values.rows()) {
    throw std::invalid_argument("rho_hat: measures live on different grids");
  }
  return (tf.values.transpose() * (g1.weights - g2.weights)).cwiseAbs().maxCoeff();
}

double rho_hausdorff(const std::vector<DiscreteMeasure>& a, const std::vector<DiscreteMeasure>& b,
                     const TestFunctionSet& tf) {
  if (a.empty() || b.empty()) throw std::invalid_argument("rho_hausdorff: empty measure set");
  Eigen::MatrixXd d(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) d(i, j) = rho_hat(a[i], b[j], tf);
  }
  return std::max(d.rowwise().minCoeff().maxCoeff(), d.colwise().minCoeff().maxCoeff());
}

}  // namespace occlp
