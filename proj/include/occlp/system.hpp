#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "occlp/expression.hpp"

namespace occlp {

using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

struct BoxShape {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

// Planar annulus {inner <= |y - center| <= outer}.
struct AnnulusShape {
  double inner = 0.0;
  double outer = 0.0;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
};

class StateRegion {
 public:
  static constexpr double kDefaultTolerance = 1e-9;

  static StateRegion box(Eigen::VectorXd lower, Eigen::VectorXd upper, double tolerance = kDefaultTolerance);
  static StateRegion annulus(double inner, double outer, Eigen::Vector2d center = Eigen::Vector2d::Zero(),
                             double tolerance = kDefaultTolerance);

  int dim() const;
  bool is_box() const { return std::holds_alternative<BoxShape>(shape_); }
  bool is_annulus() const { return std::holds_alternative<AnnulusShape>(shape_); }
  const BoxShape& as_box() const { return std::get<BoxShape>(shape_); }
  const AnnulusShape& as_annulus() const { return std::get<AnnulusShape>(shape_); }

  // Negative inside, zero on the boundary, positive outside.
  double signed_distance(const VectorRef& y) const;
  bool contains(const VectorRef& y) const { return signed_distance(y) <= tolerance_; }
  double tolerance() const { return tolerance_; }
  BoxShape bounding_box() const;

 private:
  StateRegion(std::variant<BoxShape, AnnulusShape> shape, double tolerance)
      : shape_(std::move(shape)), tolerance_(tolerance) {}

  std::variant<BoxShape, AnnulusShape> shape_;
  double tolerance_;
};

// Control set: a box, or an explicit finite list of control vectors (one per column).
class ControlRegion {
 public:
  static ControlRegion box(Eigen::VectorXd lower, Eigen::VectorXd upper);
  static ControlRegion finite(Eigen::MatrixXd points);

  int dim() const { return static_cast<int>(is_finite_ ? points_.rows() : lower_.size()); }
  bool is_finite() const { return is_finite_; }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  const Eigen::MatrixXd& points() const { return points_; }

  bool contains(const VectorRef& u, double tolerance = 1e-12) const;
  // Box: componentwise clamp. Finite: nearest listed control.
  Eigen::VectorXd project(const VectorRef& u) const;

 private:
  ControlRegion() = default;

  bool is_finite_ = false;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  Eigen::MatrixXd points_;
};

using DynamicsFn = std::function<Eigen::VectorXd(const VectorRef& y, const VectorRef& u)>;
using CostFn = std::function<double(const VectorRef& y, const VectorRef& u)>;

struct FirstIntegral {
  std::string label;
  std::function<double(const VectorRef&)> value;
  std::function<Eigen::VectorXd(const VectorRef&)> gradient;
};

// A controlled ODE y' = f(y, u) with running cost k(y, u) on a compact region.
// Immutable once built; the evaluators are re-entrant.
struct SystemSpec {
  std::string name;
  int dim_state = 0;
  int dim_control = 0;
  std::string dynamics_id;
  std::string cost_id;
  StateRegion region = StateRegion::box(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
  ControlRegion control_region = ControlRegion::box(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
  std::vector<FirstIntegral> first_integrals;
  double bound_f = 0.0;  // >= sup |f| over Y x U
  double bound_k = 0.0;  // >= sup |k| over Y x U
  DynamicsFn dynamics;
  CostFn cost;
};

Eigen::VectorXd eval_dynamics(const SystemSpec& spec, const VectorRef& y, const VectorRef& u);
double eval_cost(const SystemSpec& spec, const VectorRef& y, const VectorRef& u);

// Built-in dynamics: "rotation", "frozen", "scalar-drift". Throws on unknown ids.
DynamicsFn resolve_dynamics(const std::string& dynamics_id, int dim_state);
// Named aliases ("first-coordinate", "control-squared", ...) or an expression.
Expression resolve_cost(const std::string& cost_id);

SystemSpec make_rotation_system(double inner, double outer, const std::string& cost_id = "y1",
                                double control_bound = 1.0);
SystemSpec make_frozen_system(const std::string& cost_id = "y1 + u1^2",
                              StateRegion region = StateRegion::box(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)),
                              ControlRegion controls = ControlRegion::box(Eigen::VectorXd::Constant(1, -1.0),
                                                                          Eigen::VectorXd::Constant(1, 1.0)));
SystemSpec make_scalar_drift_system(const std::string& cost_id = "y1");

struct CustomSystemDecl {
  std::string name = "custom";
  std::vector<std::string> dynamics;  // one expression per state component
  std::string cost = "0";
  std::vector<std::string> first_integrals;
};
SystemSpec make_custom_system(const CustomSystemDecl& decl, StateRegion region, ControlRegion controls);

// Quasi-uniform (Halton) samples of Y x U: states are columns of `states`, controls of `controls`.
struct StateControlSamples {
  Eigen::MatrixXd states;
  Eigen::MatrixXd controls;
};
StateControlSamples sample_state_controls(const SystemSpec& spec, int count);

struct BoundaryPoint {
  Eigen::VectorXd state;
  Eigen::VectorXd outward_normal;
};
std::vector<BoundaryPoint> sample_boundary(const StateRegion& region, int count);

struct FirstIntegralReport {
  double max_residual = 0.0;
  int samples = 0;
  bool passed = false;
};
FirstIntegralReport check_first_integrals(const SystemSpec& spec, int sample_count, double tolerance = 1e-10);

struct InvarianceReport {
  double max_outward = 0.0;
  Eigen::VectorXd worst_state;
  Eigen::VectorXd worst_control;
  bool passed = false;
};
InvarianceReport check_forward_invariance(const SystemSpec& spec, int boundary_sample_count,
                                          double tolerance = 1e-9);

double radical_inverse(unsigned index, unsigned base);

}  // namespace occlp
