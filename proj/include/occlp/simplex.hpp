#pragma once

#include <string>

#include <Eigen/Core>

namespace occlp {

enum class LpStatus { Optimal, Infeasible, Unbounded, ToleranceFailure };

const char* to_string(LpStatus status);

// min cost^T x  subject to  A x = b,  x >= 0.
struct StandardFormLp {
  Eigen::VectorXd cost;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

struct SimplexOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  int max_iterations = 200000;
  // Consecutive degenerate pivots before switching from Dantzig to Bland pricing.
  int degenerate_switch = 50;
};

struct SimplexResult {
  LpStatus status = LpStatus::ToleranceFailure;
  Eigen::VectorXd x;
  Eigen::VectorXd duals;  // reduced costs are cost - A^T duals
  double objective = 0.0;
  int iterations = 0;
  int phase1_iterations = 0;
  double primal_residual = 0.0;     // |A x - b|_inf
  double dual_infeasibility = 0.0;  // max(0, -min reduced cost)
  double complementarity = 0.0;     // sum x_j |d_j|
  double duality_gap = 0.0;         // |c^T x - b^T y|
  std::string message;
};

// Dense two-phase revised primal simplex. The basis is refactorised with LU at every
// pivot; row counts here are small (tens), so this stays cheap and accurate.
SimplexResult solve_standard_form(const StandardFormLp& lp, const SimplexOptions& options = {});

}  // namespace occlp
