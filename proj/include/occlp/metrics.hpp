#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "occlp/basis.hpp"
#include "occlp/grid.hpp"
#include "occlp/system.hpp"

namespace occlp {

// The basis functions plus the constant 1, each divided by its sup-norm over the
// region, tabulated on the atoms of one grid. Column 0 is the constant.
struct TestFunctionSet {
  int max_degree = 0;
  Eigen::VectorXd sup_norms;  // one per function, > 0
  Eigen::MatrixXd values;     // atoms x functions, already normalised
  std::uint64_t grid_fingerprint = 0;

  Eigen::Index size() const { return values.cols(); }
};

// Sup-norms are taken over the grid atoms and `samples` quasi-random points of the region.
TestFunctionSet make_test_functions(const BasisSpec& basis, const Grid& grid, const SystemSpec& spec,
                                    int samples = 4096);

// max over test functions of |int q dg1 - int q dg2|. A moment pseudometric, not a
// true weak-* metric: measures with equal moments up to the basis degree are at distance 0.
double rho_hat(const DiscreteMeasure& g1, const DiscreteMeasure& g2, const TestFunctionSet& tf);

// max of the two directed sup-inf distances under rho_hat.
double rho_hausdorff(const std::vector<DiscreteMeasure>& a, const std::vector<DiscreteMeasure>& b,
                     const TestFunctionSet& tf);

}  // namespace occlp
