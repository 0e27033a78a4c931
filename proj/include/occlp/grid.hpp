#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "occlp/basis.hpp"
#include "occlp/system.hpp"

namespace occlp {

enum class Placement { Midpoint, Nodes };

struct GridOptions {
  // Box regions: one count per state axis. Annulus: {n_r, n_theta}.
  std::vector<int> state_resolution;
  // One count per control axis; ignored for finite control sets.
  std::vector<int> control_resolution;
  Placement state_placement = Placement::Midpoint;
  Placement radial_placement = Placement::Nodes;
  Placement control_placement = Placement::Nodes;
};

class NearestAtomIndex;

// Weighted-atom discretisation of Y x U. Atom a is (states.col(a), controls.col(a)).
class Grid {
 public:
  Grid(Eigen::MatrixXd states, Eigen::MatrixXd controls, GridOptions options, bool polar);

  Eigen::Index size() const { return states_.cols(); }
  const Eigen::MatrixXd& states() const { return states_; }
  const Eigen::MatrixXd& controls() const { return controls_; }
  const GridOptions& options() const { return options_; }
  bool polar() const { return polar_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

  // Euclidean nearest atom in the joint (y, u) space; ties go to the lower index.
  Eigen::Index nearest_atom(const VectorRef& y, const VectorRef& u) const;

 private:
  Eigen::MatrixXd states_;
  Eigen::MatrixXd controls_;
  GridOptions options_;
  bool polar_ = false;
  std::uint64_t fingerprint_ = 0;
  std::shared_ptr<const NearestAtomIndex> index_;
};

// Axis points on [lower, upper]: cell centres or equispaced nodes including both ends.
Eigen::VectorXd axis_points(double lower, double upper, int count, Placement placement);

// Anchors (typically y0) are appended when they are not already atoms: for annulus
// regions a whole ring through the anchor, for boxes the anchor times every control.
Grid build_grid(const SystemSpec& spec, const GridOptions& options, const std::vector<Eigen::VectorXd>& anchors = {});

// B(b, a) = grad phi_b(y_a)^T f(y_a, u_a)
Eigen::MatrixXd assemble_flow_matrix(const Grid& grid, const BasisSpec& basis, const SystemSpec& spec);
// C(b, a) = phi_b(y0) - phi_b(y_a)
Eigen::MatrixXd assemble_initial_matrix(const Grid& grid, const BasisSpec& basis, const SystemSpec& spec,
                                        const VectorRef& y0);
// c(a) = k(y_a, u_a)
Eigen::VectorXd assemble_cost_vector(const Grid& grid, const SystemSpec& spec);

// Nonnegative weights over the atoms of one grid.
struct DiscreteMeasure {
  Eigen::VectorXd weights;
  std::uint64_t grid_fingerprint = 0;

  double mass() const { return weights.sum(); }

  static DiscreteMeasure zero(const Grid& grid);
  static DiscreteMeasure dirac(const Grid& grid, Eigen::Index atom);
  static DiscreteMeasure uniform(const Grid& grid);
};

// Throws unless weights are nonnegative and, when `probability`, sum to one within tol.
void validate_measure(const DiscreteMeasure& measure, bool probability, double tol = 1e-9);

double integrate_measure(const DiscreteMeasure& measure, const VectorRef& q_values);

}  // namespace occlp
