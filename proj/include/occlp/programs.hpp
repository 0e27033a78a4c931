#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "occlp/basis.hpp"
#include "occlp/grid.hpp"
#include "occlp/simplex.hpp"
#include "occlp/system.hpp"

namespace occlp {

enum class ProgramVariant { Ergodic, NonErgodic, Discounted, Perturbed };
enum class RowKind { Flow, Initial, Discounted, Normalization };

const char* to_string(ProgramVariant variant);
const char* to_string(RowKind kind);
ProgramVariant parse_variant(const std::string& name);

inline constexpr double kDefaultXiMassCap = 1e6;

struct RowInfo {
  RowKind kind = RowKind::Normalization;
  Eigen::Index basis_index = -1;  // -1 for the normalization row
};

// Finite LP over the variables [gamma (one per atom), xi (one per atom, when present)]:
//   min objective^T x  s.t.  rows x = rhs,  x >= 0,  optionally sum(xi) <= xi_mass_cap.
struct LpInstance {
  ProgramVariant variant = ProgramVariant::Ergodic;
  Eigen::VectorXd objective;
  Eigen::MatrixXd rows;
  Eigen::VectorXd rhs;
  std::vector<RowInfo> row_info;
  Eigen::Index gamma_count = 0;
  Eigen::Index xi_count = 0;
  std::optional<double> xi_mass_cap;
  std::uint64_t grid_fingerprint = 0;
  Eigen::VectorXd y0;
  double lambda = 0.0;
  double epsilon = 0.0;
  double flow_bound = 0.0;  // M used by the perturbed objective

  Eigen::Index variable_count() const { return gamma_count + xi_count; }
};

LpInstance build_ergodic_lp(const Grid& grid, const BasisSpec& basis, const SystemSpec& spec);
LpInstance build_nonergodic_lp(const Grid& grid, const BasisSpec& basis, const SystemSpec& spec, const VectorRef& y0,
                               std::optional<double> xi_mass_cap = kDefaultXiMassCap);
LpInstance build_discounted_lp(const Grid& grid, const BasisSpec& basis, const SystemSpec& spec, const VectorRef& y0,
                               double lambda);
// Objective sum (k + 2 eps) gamma + M eps sum xi over the non-ergodic rows, M = spec.bound_f.
LpInstance build_perturbed_lp(const Grid& grid, const BasisSpec& basis, const SystemSpec& spec, const VectorRef& y0,
                              double epsilon, std::optional<double> xi_mass_cap = kDefaultXiMassCap);

struct SolverStats {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_infeasibility = 0.0;
  double complementarity = 0.0;
  double duality_gap = 0.0;
};

struct LpSolution {
  LpStatus status = LpStatus::ToleranceFailure;
  double value = 0.0;
  DiscreteMeasure gamma;
  std::optional<DiscreteMeasure> xi;
  Eigen::VectorXd row_duals;  // one per equality row, in row_info order
  double cap_dual = 0.0;
  bool cap_binding = false;
  SolverStats stats;
  std::string diagnostics;

  bool optimal() const { return status == LpStatus::Optimal; }
};

LpSolution solve(const LpInstance& instance, const SimplexOptions& options = {});

// (mu, psi, eta) with psi, eta expanded in the basis. For perturbed instances the
// atom-wise inequalities carry the shifts 2 eps (cost family) and -M eps (flow family).
struct DualCertificate {
  double mu = 0.0;
  Eigen::VectorXd psi_coeffs;
  Eigen::VectorXd eta_coeffs;
  Eigen::VectorXd y0;
  double cost_shift = 0.0;
  double flow_floor = 0.0;
};

DualCertificate extract_dual_certificate(const LpSolution& solution, const LpInstance& instance,
                                         const BasisSpec& basis, const VectorRef& y0);

struct CertificateCheck {
  double min_cost_slack = 0.0;  // min of k + shift + psi(y0) - psi(y) + grad eta^T f - mu
  double min_flow_slack = 0.0;  // min of grad psi^T f - floor
  Eigen::Index worst_cost_point = -1;
  Eigen::Index worst_flow_point = -1;
  bool passed = false;
};

// Evaluates both inequality families at the given (state, control) columns.
CertificateCheck check_certificate(const DualCertificate& cert, const BasisSpec& basis, const SystemSpec& spec,
                                   const Eigen::MatrixXd& states, const Eigen::MatrixXd& controls,
                                   double tolerance = 1e-6);
CertificateCheck check_certificate(const DualCertificate& cert, const BasisSpec& basis, const SystemSpec& spec,
                                   const Grid& grid, double tolerance = 1e-6);

bool verify_weak_duality(double primal_value, double dual_mu, double tolerance = 1e-6);

struct MembershipResidual {
  double w_residual = 0.0;      // |B gamma|_inf
  double omega_residual = 0.0;  // min_t over xi >= 0 of |C gamma + B xi|_inf
  bool cap_binding = false;
  LpStatus status = LpStatus::Optimal;
};

MembershipResidual membership_residual(const DiscreteMeasure& measure, const Grid& grid, const BasisSpec& basis,
                                       const SystemSpec& spec, const VectorRef& y0,
                                       std::optional<double> xi_mass_cap = kDefaultXiMassCap);

// Mass of `measure` on atoms whose state lies within `tol` of the first-integral level F(y) = z.
double mass_on_level(const DiscreteMeasure& measure, const Grid& grid, const FirstIntegral& integral, double z,
                     double tol = 1e-9);

// Plain-text LP export; the format is described in docs/lp-format.md.
void write_lp_text(const LpInstance& instance, std::ostream& out);

}  // namespace occlp
