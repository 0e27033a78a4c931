#include "occlp/simplex.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace occlp {

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::ToleranceFailure: return "tolerance-failure";
  }
  return "unknown";
}

namespace {

enum class PhaseOutcome { Optimal, Unbounded, IterationLimit };

// Working state of the revised simplex over [A | I] (artificial columns are implicit).
class RevisedSimplex {
 public:
  RevisedSimplex(Eigen::MatrixXd A, Eigen::VectorXd b, const SimplexOptions& options)
      : A_(std::move(A)), b_(std::move(b)), options_(options), m_(A_.rows()), n_(A_.cols()) {
    basic_.resize(static_cast<std::size_t>(m_));
    std::iota(basic_.begin(), basic_.end(), n_);
    in_basis_.assign(static_cast<std::size_t>(n_ + m_), 0);
    for (auto j : basic_) in_basis_[static_cast<std::size_t>(j)] = 1;
  }

  PhaseOutcome run(const Eigen::VectorXd& cost, bool artificials_may_enter, int& iterations) {
    int degenerate_streak = 0;
    bool bland = false;
    for (;;) {
      if (iterations >= options_.max_iterations) return PhaseOutcome::IterationLimit;
      factor();
      const Eigen::VectorXd xB = lu_.solve(b_);
      Eigen::VectorXd cB(m_);
      for (Eigen::Index i = 0; i < m_; ++i) cB[i] = cost[basic_[static_cast<std::size_t>(i)]];
      const Eigen::VectorXd y = lu_.transpose().solve(cB);
      const Eigen::VectorXd d_orig = cost.head(n_) - A_.transpose() * y;

      Eigen::Index entering = -1;
      double best = -options_.optimality_tol;
      const Eigen::Index limit = artificials_may_enter ? n_ + m_ : n_;
      for (Eigen::Index j = 0; j < limit; ++j) {
        if (in_basis_[static_cast<std::size_t>(j)]) continue;
        const double dj = j < n_ ? d_orig[j] : cost[j] - y[j - n_];
        if (bland) {
          if (dj < -options_.optimality_tol) {
            entering = j;
            break;
          }
        } else if (dj < best) {
          best = dj;
          entering = j;
        }
      }
      if (entering < 0) return PhaseOutcome::Optimal;

      const Eigen::VectorXd w = lu_.solve(column(entering));
      Eigen::Index leave = -1;
      double ratio_best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m_; ++i) {
        const Eigen::Index var = basic_[static_cast<std::size_t>(i)];
        double ratio;
        if (!artificials_may_enter && var >= n_) {
          // Artificials sit at zero in phase two and may not move off it.
          if (std::abs(w[i]) <= options_.pivot_tol) continue;
          ratio = 0.0;
        } else {
          if (w[i] <= options_.pivot_tol) continue;
          ratio = std::max(xB[i], 0.0) / w[i];
        }
        bool take = false;
        if (leave < 0 || ratio < ratio_best - 1e-12) {
          take = true;
        } else if (std::abs(ratio - ratio_best) <= 1e-12) {
          const Eigen::Index incumbent = basic_[static_cast<std::size_t>(leave)];
          take = bland ? var < incumbent : std::abs(w[i]) > std::abs(w[leave]);
        }
        if (take) {
          leave = i;
          ratio_best = ratio;
        }
      }
      if (leave < 0) return PhaseOutcome::Unbounded;

      if (ratio_best <= 1e-12) {
        if (++degenerate_streak > options_.degenerate_switch) bland = true;
      } else {
        degenerate_streak = 0;
        bland = false;
      }
      pivot(leave, entering);
      ++iterations;
    }
  }

  // Replace artificials left in the basis by original columns where the row allows it.
  void drive_out_artificials() {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (basic_[static_cast<std::size_t>(i)] < n_) continue;
      factor();
      Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
      e[i] = 1.0;
      const Eigen::VectorXd z = lu_.transpose().solve(e);
      const Eigen::VectorXd row = A_.transpose() * z;
      Eigen::Index best = -1;
      double best_abs = 1e-7;
      for (Eigen::Index j = 0; j < n_; ++j) {
        if (in_basis_[static_cast<std::size_t>(j)]) continue;
        if (std::abs(row[j]) > best_abs) {
          best_abs = std::abs(row[j]);
          best = j;
        }
      }
      if (best >= 0) pivot(i, best);
    }
  }

  void factor() {
    Eigen::MatrixXd B(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) B.col(i) = column(basic_[static_cast<std::size_t>(i)]);
    lu_.compute(B);
  }

  const Eigen::PartialPivLU<Eigen::MatrixXd>& lu() const { return lu_; }
  const std::vector<Eigen::Index>& basic() const { return basic_; }
  Eigen::Index rows() const { return m_; }
  Eigen::Index cols() const { return n_; }
  const Eigen::VectorXd& rhs() const { return b_; }

 private:
  Eigen::VectorXd column(Eigen::Index j) const {
    if (j < n_) return A_.col(j);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
    e[j - n_] = 1.0;
    return e;
  }

  void pivot(Eigen::Index leave_row, Eigen::Index entering) {
    in_basis_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(leave_row)])] = 0;
    basic_[static_cast<std::size_t>(leave_row)] = entering;
    in_basis_[static_cast<std::size_t>(entering)] = 1;
  }

  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
  SimplexOptions options_;
  Eigen::Index m_;
  Eigen::Index n_;
  std::vector<Eigen::Index> basic_;
  std::vector<char> in_basis_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

}  // namespace

SimplexResult solve_standard_form(const StandardFormLp& lp, const SimplexOptions& options) {
  const Eigen::Index m = lp.A.rows();
  const Eigen::Index n = lp.A.cols();
  if (lp.cost.size() != n || lp.b.size() != m) throw std::invalid_argument("standard-form LP dimension mismatch");
  if (!lp.A.allFinite() || !lp.b.allFinite() || !lp.cost.allFinite()) {
    throw std::invalid_argument("standard-form LP has non-finite data");
  }

  SimplexResult result;
  result.x = Eigen::VectorXd::Zero(n);
  result.duals = Eigen::VectorXd::Zero(m);

  const Eigen::VectorXd sign = (lp.b.array() < 0.0).select(Eigen::VectorXd::Constant(m, -1.0), 1.0);
  RevisedSimplex simplex(sign.asDiagonal() * lp.A, sign.cwiseProduct(lp.b), options);

  int iterations = 0;
  Eigen::VectorXd phase1_cost = Eigen::VectorXd::Zero(n + m);
  phase1_cost.tail(m).setOnes();
  auto outcome = simplex.run(phase1_cost, true, iterations);
  result.phase1_iterations = iterations;
  if (outcome == PhaseOutcome::IterationLimit) {
    result.iterations = iterations;
    result.message = "iteration limit reached in phase one";
    return result;
  }
  simplex.factor();
  {
    const Eigen::VectorXd xB = simplex.lu().solve(simplex.rhs());
    double infeasibility = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (simplex.basic()[static_cast<std::size_t>(i)] >= n) infeasibility += std::abs(xB[i]);
    }
    const double scale = std::max(1.0, lp.b.cwiseAbs().maxCoeff());
    if (infeasibility > 1e-8 * scale) {
      result.status = LpStatus::Infeasible;
      result.iterations = iterations;
      std::ostringstream os;
      os << "phase one ended with artificial mass " << infeasibility;
      result.message = os.str();
      return result;
    }
  }
  simplex.drive_out_artificials();

  Eigen::VectorXd phase2_cost = Eigen::VectorXd::Zero(n + m);
  phase2_cost.head(n) = lp.cost;
  outcome = simplex.run(phase2_cost, false, iterations);
  result.iterations = iterations;
  if (outcome == PhaseOutcome::Unbounded) {
    result.status = LpStatus::Unbounded;
    result.message = "entering column has no blocking row";
    return result;
  }
  if (outcome == PhaseOutcome::IterationLimit) {
    result.message = "iteration limit reached in phase two";
    return result;
  }

  simplex.factor();
  Eigen::VectorXd xB = simplex.lu().solve(simplex.rhs());
  {
    // One step of iterative refinement on the final basic solution.
    Eigen::MatrixXd basis_matrix(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index var = simplex.basic()[static_cast<std::size_t>(i)];
      basis_matrix.col(i) = var < n ? Eigen::VectorXd(sign.cwiseProduct(lp.A.col(var)))
                                    : Eigen::VectorXd(Eigen::VectorXd::Unit(m, var - n));
    }
    xB += simplex.lu().solve(simplex.rhs() - basis_matrix * xB);
  }
  Eigen::VectorXd cB(m);
  for (Eigen::Index i = 0; i < m; ++i) cB[i] = phase2_cost[simplex.basic()[static_cast<std::size_t>(i)]];
  const Eigen::VectorXd y = simplex.lu().transpose().solve(cB);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index var = simplex.basic()[static_cast<std::size_t>(i)];
    if (var < n) result.x[var] = std::max(xB[i], 0.0);
  }
  result.duals = sign.cwiseProduct(y);
  result.objective = lp.cost.dot(result.x);

  const Eigen::VectorXd reduced = lp.cost - lp.A.transpose() * result.duals;
  result.primal_residual = m > 0 ? (lp.A * result.x - lp.b).cwiseAbs().maxCoeff() : 0.0;
  result.dual_infeasibility = n > 0 ? std::max(0.0, -reduced.minCoeff()) : 0.0;
  result.complementarity = result.x.cwiseProduct(reduced.cwiseAbs()).sum();
  result.duality_gap = std::abs(result.objective - lp.b.dot(result.duals));

  if (result.primal_residual <= 1e-7 && result.complementarity <= 1e-6 && result.dual_infeasibility <= 1e-7) {
    result.status = LpStatus::Optimal;
  } else {
    std::ostringstream os;
    os << "optimality checks failed: primal residual " << result.primal_residual << ", dual infeasibility "
       << result.dual_infeasibility << ", complementarity " << result.complementarity;
    result.message = os.str();
  }
  return result;
}

}  // namespace occlp
