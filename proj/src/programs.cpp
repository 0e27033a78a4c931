#include "occlp/programs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace occlp {

const char* to_string(ProgramVariant variant) {
  switch (variant) {
    case ProgramVariant::Ergodic: return "ergodic";
    case ProgramVariant::NonErgodic: return "nonergodic";
    case ProgramVariant::Discounted: return "discounted";
    case ProgramVariant::Perturbed: return "perturbed";
  }
  return "unknown";
}

const char* to_string(RowKind kind) {
  switch (kind) {
    case RowKind::Flow: return "flow";
    case RowKind::Initial: return "initial";
    case RowKind::Discounted: return "discounted";
    case RowKind::Normalization: return "normalization";
  }
  return "unknown";
}

ProgramVariant parse_variant(const std::string& name) {
  for (auto v : {ProgramVariant::Ergodic, ProgramVariant::NonErgodic, ProgramVariant::Discounted,
                 ProgramVariant::Perturbed}) {
    if (name == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown program variant '" + name + "'");
}

namespace {

void append_rows(LpInstance& lp, const Eigen::MatrixXd& block, RowKind kind, Eigen::Index column_offset) {
  const Eigen::Index start = lp.rows.rows();
  lp.rows.conservativeResize(start + block.rows(), Eigen::NoChange);
  lp.rows.bottomRows(block.rows()).setZero();
  lp.rows.block(start, column_offset, block.rows(), block.cols()) = block;
  lp.rhs.conservativeResize(start + block.rows());
  lp.rhs.tail(block.rows()).setZero();
  for (Eigen::Index b = 0; b < block.rows(); ++b) lp.row_info.push_back({kind, b});
}

void append_normalization(LpInstance& lp) {
  const Eigen::Index start = lp.rows.rows();
  lp.rows.conservativeResize(start + 1, Eigen::NoChange);
  lp.rows.row(start).setZero();
  lp.rows.row(start).head(lp.gamma_count).setOnes();
  lp.rhs.conservativeResize(start + 1);
  lp.rhs[start] = 1.0;
  lp.row_info.push_back({RowKind::Normalization, -1});
}

LpInstance empty_instance(ProgramVariant variant, const Grid& grid, bool with_xi) {
  LpInstance lp;
  lp.variant = variant;
  lp.gamma_count = grid.size();
  lp.xi_count = with_xi ? grid.size() : 0;
  lp.rows.resize(0, lp.variable_count());
  lp.rhs.resize(0);
  lp.grid_fingerprint = grid.fingerprint();
  return lp;
}

LpInstance coupled_instance(ProgramVariant variant, const Grid& grid, const BasisSpec& basis, const SystemSpec& spec,
                            const VectorRef& y0, std::optional<double> xi_mass_cap) {
  if (xi_mass_cap && *xi_mass_cap <= 0.0) throw std::invalid_argument("xi mass cap must be positive");
  const Eigen::MatrixXd B = assemble_flow_matrix(grid, basis, spec);
  const Eigen::MatrixXd C = assemble_initial_matrix(grid, basis, spec, y0);
  LpInstance lp = empty_instance(variant, grid, true);
  const Eigen::Index N = grid.size();
  append_rows(lp, B, RowKind::Flow, 0);
  append_rows(lp, C, RowKind::Initial, 0);
  // Initial-condition rows couple gamma and xi: C gamma + B xi = 0.
  lp.rows.block(B.rows(), N, B.rows(), N) = B;
  append_normalization(lp);
  lp.objective = Eigen::VectorXd::Zero(2 * N);
  lp.objective.head(N) = assemble_cost_vector(grid, spec);
  lp.xi_mass_cap = xi_mass_cap;
  lp.y0 = y0;
  return lp;
}

}  // namespace

LpInstance build_ergodic_lp(const Grid& grid, const BasisSpec& basis, const SystemSpec& spec) {
  LpInstance lp = empty_instance(ProgramVariant::Ergodic, grid, false);
  append_rows(lp, assemble_flow_matrix(grid, basis, spec), RowKind::Flow, 0);
  append_normalization(lp);
  lp.objective = assemble_cost_vector(grid, spec);
  return lp;
}

LpInstance build_nonergodic_lp(const Grid& grid, const BasisSpec& basis, const SystemSpec& spec, const VectorRef& y0,
                               std::optional<double> xi_mass_cap) {
  return coupled_instance(ProgramVariant::NonErgodic, grid, basis, spec, y0, xi_mass_cap);
}

LpInstance build_discounted_lp(const Grid& grid, const BasisSpec& basis, const SystemSpec& spec, const VectorRef& y0,
                               double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("discount rate lambda must be positive");
  LpInstance lp = empty_instance(ProgramVariant::Discounted, grid, false);
  const Eigen::MatrixXd rows =
      assemble_flow_matrix(grid, basis, spec) + lambda * assemble_initial_matrix(grid, basis, spec, y0);
  append_rows(lp, rows, RowKind::Discounted, 0);
  append_normalization(lp);
  lp.objective = assemble_cost_vector(grid, spec);
  lp.y0 = y0;
  lp.lambda = lambda;
  return lp;
}

LpInstance build_perturbed_lp(const Grid& grid, const BasisSpec& basis, const SystemSpec& spec, const VectorRef& y0,
                              double epsilon, std::optional<double> xi_mass_cap) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("perturbation epsilon must be nonnegative");
  LpInstance lp = coupled_instance(ProgramVariant::Perturbed, grid, basis, spec, y0, xi_mass_cap);
  if (epsilon > 0.0) {
    lp.objective.head(lp.gamma_count).array() += 2.0 * epsilon;
    lp.objective.tail(lp.xi_count).setConstant(spec.bound_f * epsilon);
  }
  lp.epsilon = epsilon;
  lp.flow_bound = spec.bound_f;
  return lp;
}

LpSolution solve(const LpInstance& instance, const SimplexOptions& options) {
  const Eigen::Index n = instance.variable_count();
  const Eigen::Index m = instance.rows.rows();
  if (instance.objective.size() != n || instance.rows.cols() != n || instance.rhs.size() != m ||
      static_cast<Eigen::Index>(instance.row_info.size()) != m) {
    throw std::invalid_argument("malformed LP instance");
  }
  const bool capped = instance.xi_mass_cap.has_value() && instance.xi_count > 0;

  StandardFormLp lp;
  if (capped) {
    lp.A = Eigen::MatrixXd::Zero(m + 1, n + 1);
    lp.A.topLeftCorner(m, n) = instance.rows;
    lp.A.block(m, instance.gamma_count, 1, instance.xi_count).setOnes();
    lp.A(m, n) = 1.0;
    lp.b.resize(m + 1);
    lp.b << instance.rhs, *instance.xi_mass_cap;
    lp.cost = Eigen::VectorXd::Zero(n + 1);
    lp.cost.head(n) = instance.objective;
  } else {
    lp.A = instance.rows;
    lp.b = instance.rhs;
    lp.cost = instance.objective;
  }

  const SimplexResult r = solve_standard_form(lp, options);
  LpSolution sol;
  sol.status = r.status;
  sol.diagnostics = r.message;
  sol.stats = {r.iterations, r.primal_residual, r.dual_infeasibility, r.complementarity, r.duality_gap};
  sol.gamma = DiscreteMeasure{r.x.head(instance.gamma_count), instance.grid_fingerprint};
  if (instance.xi_count > 0) {
    sol.xi = DiscreteMeasure{r.x.segment(instance.gamma_count, instance.xi_count), instance.grid_fingerprint};
  }
  sol.row_duals = r.duals.head(m);
  if (capped) {
    sol.cap_dual = r.duals[m];
    sol.cap_binding = r.x[n] <= 1e-9 * std::max(1.0, *instance.xi_mass_cap);
  }
  sol.value = instance.objective.dot(r.x.head(n));
  return sol;
}

DualCertificate extract_dual_certificate(const LpSolution& solution, const LpInstance& instance,
                                         const BasisSpec& basis, const VectorRef& y0) {
  if (!solution.optimal()) throw std::invalid_argument("dual certificate requires an optimal solution");
  if (instance.variant == ProgramVariant::Discounted) {
    throw std::invalid_argument("dual certificates are defined for ergodic, non-ergodic and perturbed programs");
  }
  if (solution.row_duals.size() != static_cast<Eigen::Index>(instance.row_info.size())) {
    throw std::invalid_argument("solution does not belong to this instance");
  }
  DualCertificate cert;
  cert.psi_coeffs = Eigen::VectorXd::Zero(basis.size());
  cert.eta_coeffs = Eigen::VectorXd::Zero(basis.size());
  cert.y0 = y0;
  for (std::size_t i = 0; i < instance.row_info.size(); ++i) {
    const auto& info = instance.row_info[i];
    const double dual = solution.row_duals[static_cast<Eigen::Index>(i)];
    switch (info.kind) {
      case RowKind::Normalization: cert.mu = dual; break;
      case RowKind::Flow: cert.eta_coeffs[info.basis_index] = -dual; break;
      case RowKind::Initial: cert.psi_coeffs[info.basis_index] = -dual; break;
      case RowKind::Discounted: break;
    }
  }
  if (instance.variant == ProgramVariant::Perturbed) {
    cert.cost_shift = 2.0 * instance.epsilon;
    cert.flow_floor = -instance.flow_bound * instance.epsilon;
  }
  // A binding xi-mass cap contributes its (nonpositive) multiplier to the flow family.
  cert.flow_floor += solution.cap_dual;
  return cert;
}

CertificateCheck check_certificate(const DualCertificate& cert, const BasisSpec& basis, const SystemSpec& spec,
                                   const Eigen::MatrixXd& states, const Eigen::MatrixXd& controls, double tolerance) {
  if (states.cols() != controls.cols()) throw std::invalid_argument("check_certificate: point count mismatch");
  CertificateCheck check;
  check.min_cost_slack = std::numeric_limits<double>::infinity();
  check.min_flow_slack = std::numeric_limits<double>::infinity();
  const bool has_y0 = cert.y0.size() == basis.dim;
  const double psi_y0 = has_y0 ? combination_value(basis, cert.psi_coeffs, cert.y0) : 0.0;
  for (Eigen::Index a = 0; a < states.cols(); ++a) {
    const auto y = states.col(a);
    const auto u = controls.col(a);
    const Eigen::VectorXd f = spec.dynamics(y, u);
    const Eigen::MatrixXd G = phi_gradients(basis, y);
    const double psi_y = combination_value(basis, cert.psi_coeffs, y);
    const double cost_slack =
        spec.cost(y, u) + cert.cost_shift + (psi_y0 - psi_y) + (G.transpose() * cert.eta_coeffs).dot(f) - cert.mu;
    const double flow_slack = (G.transpose() * cert.psi_coeffs).dot(f) - cert.flow_floor;
    if (cost_slack < check.min_cost_slack) {
      check.min_cost_slack = cost_slack;
      check.worst_cost_point = a;
    }
    if (flow_slack < check.min_flow_slack) {
      check.min_flow_slack = flow_slack;
      check.worst_flow_point = a;
    }
  }
  check.passed = check.min_cost_slack >= -tolerance && check.min_flow_slack >= -tolerance;
  return check;
}

CertificateCheck check_certificate(const DualCertificate& cert, const BasisSpec& basis, const SystemSpec& spec,
                                   const Grid& grid, double tolerance) {
  return check_certificate(cert, basis, spec, grid.states(), grid.controls(), tolerance);
}

bool verify_weak_duality(double primal_value, double dual_mu, double tolerance) {
  return primal_value >= dual_mu - tolerance;
}

MembershipResidual membership_residual(const DiscreteMeasure& measure, const Grid& grid, const BasisSpec& basis,
                                       const SystemSpec& spec, const VectorRef& y0,
                                       std::optional<double> xi_mass_cap) {
  if (measure.grid_fingerprint != grid.fingerprint() || measure.weights.size() != grid.size()) {
    throw std::invalid_argument("membership_residual: measure does not live on this grid");
  }
  validate_measure(measure, true, 1e-7);
  const Eigen::MatrixXd B = assemble_flow_matrix(grid, basis, spec);
  const Eigen::MatrixXd C = assemble_initial_matrix(grid, basis, spec, y0);
  MembershipResidual out;
  out.w_residual = (B * measure.weights).cwiseAbs().maxCoeff();

  // Variables [xi (N), t, s_plus (nb), s_minus (nb), cap slack?]; minimise t.
  const Eigen::Index N = grid.size();
  const Eigen::Index nb = basis.size();
  const bool capped = xi_mass_cap.has_value();
  const Eigen::Index n = N + 1 + 2 * nb + (capped ? 1 : 0);
  const Eigen::Index m = 2 * nb + (capped ? 1 : 0);
  const Eigen::VectorXd c_gamma = C * measure.weights;
  StandardFormLp lp;
  lp.A = Eigen::MatrixXd::Zero(m, n);
  lp.b = Eigen::VectorXd::Zero(m);
  lp.cost = Eigen::VectorXd::Zero(n);
  lp.cost[N] = 1.0;
  lp.A.topLeftCorner(nb, N) = B;
  lp.A.block(nb, 0, nb, N) = -B;
  lp.A.block(0, N, 2 * nb, 1).setConstant(-1.0);
  lp.A.block(0, N + 1, 2 * nb, 2 * nb).setIdentity();
  lp.b.head(nb) = -c_gamma;
  lp.b.segment(nb, nb) = c_gamma;
  if (capped) {
    lp.A.block(2 * nb, 0, 1, N).setOnes();
    lp.A(2 * nb, n - 1) = 1.0;
    lp.b[2 * nb] = *xi_mass_cap;
  }
  const SimplexResult r = solve_standard_form(lp);
  out.status = r.status;
  if (r.status != LpStatus::Optimal) {
    throw std::runtime_error(std::string("membership residual LP failed: ") + to_string(r.status) + " " + r.message);
  }
  out.omega_residual = r.x[N];
  if (capped) out.cap_binding = r.x[n - 1] <= 1e-9 * std::max(1.0, *xi_mass_cap);
  return out;
}

double mass_on_level(const DiscreteMeasure& measure, const Grid& grid, const FirstIntegral& integral, double z,
                     double tol) {
  if (measure.weights.size() != grid.size()) throw std::invalid_argument("mass_on_level: measure/grid mismatch");
  double mass = 0.0;
  for (Eigen::Index a = 0; a < grid.size(); ++a) {
    if (std::abs(integral.value(grid.states().col(a)) - z) <= tol) mass += measure.weights[a];
  }
  return mass;
}

void write_lp_text(const LpInstance& instance, std::ostream& out) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "OCCLP-LP 1\n";
  out << "VARIANT " << to_string(instance.variant) << '\n';
  out << "VARIABLES " << instance.variable_count() << " GAMMA " << instance.gamma_count << " XI "
      << instance.xi_count << '\n';
  out << "ROWS " << instance.rows.rows() << '\n';
  out << "MASS_CAP " << (instance.xi_mass_cap && instance.xi_count > 0 ? num(*instance.xi_mass_cap) : "none")
      << '\n';
  out << "OBJECTIVE\n";
  for (Eigen::Index j = 0; j < instance.objective.size(); ++j) {
    if (instance.objective[j] != 0.0) out << j << ' ' << num(instance.objective[j]) << '\n';
  }
  out << "END\n";
  for (Eigen::Index i = 0; i < instance.rows.rows(); ++i) {
    const auto& info = instance.row_info[static_cast<std::size_t>(i)];
    out << "ROW " << i << ' ' << to_string(info.kind) << ' ' << info.basis_index << ' ' << num(instance.rhs[i])
        << '\n';
    for (Eigen::Index j = 0; j < instance.rows.cols(); ++j) {
      if (instance.rows(i, j) != 0.0) out << j << ' ' << num(instance.rows(i, j)) << '\n';
    }
    out << "END\n";
  }
  out << "BOUNDS ALL >= 0\n";
  out << "EOF\n";
}

}  // namespace occlp
