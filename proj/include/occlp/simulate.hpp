#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "occlp/basis.hpp"
#include "occlp/expression.hpp"
#include "occlp/grid.hpp"
#include "occlp/programs.hpp"
#include "occlp/system.hpp"

namespace occlp {

// Stateful control law instance; created fresh for every integration.
using Controller = std::function<Eigen::VectorXd(double t, const VectorRef& y)>;

// Immutable description of an admissible control u(.). Every emitted control is
// projected onto the control region.
class Policy {
 public:
  enum class Kind { Constant, Schedule, FeedbackTable, FeedbackExpression, Periodic, SteerThenHold };

  static Policy constant(const ControlRegion& controls, Eigen::VectorXd u);
  // u(t) = controls.col(i) for times[i] <= t < times[i+1]; the last control is held.
  static Policy schedule(const ControlRegion& controls, Eigen::VectorXd times, Eigen::MatrixXd values);
  // u(y) = values.col(nearest column of cell_states to y).
  static Policy feedback_table(const ControlRegion& controls, Eigen::MatrixXd cell_states, Eigen::MatrixXd values);
  // u_i(y) = laws[i](y).
  static Policy feedback_expression(const ControlRegion& controls, std::vector<Expression> laws);
  // base evaluated at t mod period.
  static Policy periodic(const Policy& base, double period);
  // Apply `steer` until the state first comes within `capture_radius` of `target`, then `hold` forever.
  static Policy steer_then_hold(const ControlRegion& controls, Eigen::VectorXd steer, Eigen::VectorXd target,
                                Eigen::VectorXd hold, double capture_radius = 1e-3);

  Kind kind() const { return kind_; }
  const std::string& description() const { return description_; }
  Controller start() const { return factory_(); }

 private:
  Policy(Kind kind, std::string description, std::function<Controller()> factory)
      : kind_(kind), description_(std::move(description)), factory_(std::move(factory)) {}

  Kind kind_;
  std::string description_;
  std::function<Controller()> factory_;
};

const char* to_string(Policy::Kind kind);

// Fixed-step trajectory: states has one column per time, controls one column per
// step (left-endpoint sample held over [times[i], times[i+1])).
struct Trajectory {
  double dt = 0.0;
  Eigen::VectorXd times;
  Eigen::MatrixXd states;
  Eigen::MatrixXd controls;
  std::vector<char> in_region;
  std::string system_name;

  Eigen::Index steps() const { return controls.cols(); }
  double horizon() const { return times.size() ? times[times.size() - 1] : 0.0; }
  bool fully_in_region() const;
};

Eigen::VectorXd rk4_step(const SystemSpec& spec, const VectorRef& y, const VectorRef& u, double h);

// ceil(T/dt) RK4 steps, the last one shortened to land on T. Throws on a
// non-finite state, naming the step and time.
Trajectory integrate(const SystemSpec& spec, const VectorRef& y0, const Policy& policy, double T, double dt = 1e-3);

// (1/T) * integral of k along the trajectory, trapezoidal per step.
double cesaro_value(const Trajectory& traj, const SystemSpec& spec);

struct AbelResult {
  double value = 0.0;       // lambda * int_0^H e^{-lambda t} k dt
  double tail_bound = 0.0;  // e^{-lambda H} * bound_k
  double horizon = 0.0;
  long steps = 0;
};

// Smallest H with e^{-lambda H} * bound_k <= tail_tolerance.
double abel_horizon(double lambda, double bound_k, double tail_tolerance);

// Streams the integration (no trajectory is stored). Throws if the horizon leaves a
// tail larger than tail_tolerance.
AbelResult abel_value(const SystemSpec& spec, const VectorRef& y0, const Policy& policy, double lambda,
                      double horizon, double tail_tolerance, double dt = 1e-3);

// Each step puts mass h_i / T on the nearest atom to (y_i, u_i).
DiscreteMeasure empirical_occupational_measure(const Trajectory& traj, const Grid& grid);

struct DiscountedMeasure {
  DiscreteMeasure measure;  // unnormalised, mass 1 - e^{-lambda T}
  double tail_mass = 0.0;   // e^{-lambda T}

  DiscreteMeasure normalized() const;
};

// Step i gets e^{-lambda t_i} (1 - e^{-lambda h_i}). Throws when the tail exceeds tail_tolerance.
DiscountedMeasure empirical_discounted_measure(const Trajectory& traj, double lambda, const Grid& grid,
                                               double tail_tolerance = 1.0);

// One-parameter family of candidate periodic policies.
struct PolicyFamily {
  std::string label;
  std::vector<double> parameters;
  std::function<Policy(double)> make;
};

// Rotation family u(theta) = delta + (1 - delta)(1 + cos theta)/2.
PolicyFamily rotation_cosine_family(const SystemSpec& spec, std::vector<double> deltas);
// Constant controls (each column of `controls`); parameter = column index.
PolicyFamily constant_family(const SystemSpec& spec, const Eigen::MatrixXd& controls);

struct PeriodicCandidate {
  double parameter = 0.0;
  bool closed = false;
  bool stationary = false;
  double period = 0.0;
  double closure_error = 0.0;
  double value = 0.0;
};

struct PeriodicSearchResult {
  std::vector<PeriodicCandidate> candidates;
  Eigen::Index best = -1;
  bool strictly_decreasing = false;  // values over closed candidates, in family order

  double best_value() const { return candidates.at(static_cast<std::size_t>(best)).value; }
};

struct PeriodicSearchOptions {
  double dt = 1e-3;
  double max_period = 500.0;
  double closure_tolerance = 1e-3;
};

// For each candidate: find the first return to y0, refine the period, re-integrate one
// period and take its Cesaro value. Throws if no candidate closes its loop.
PeriodicSearchResult periodic_value_search(const SystemSpec& spec, const VectorRef& y0, const PolicyFamily& family,
                                           const PeriodicSearchOptions& options = {});

struct ResidualRow {
  double T = 0.0;
  double w_residual = 0.0;
  double omega_residual = 0.0;
};

std::vector<ResidualRow> residual_decay_study(const SystemSpec& spec, const VectorRef& y0, const Policy& policy,
                                              const std::vector<double>& T_list, const Grid& grid,
                                              const BasisSpec& basis, double dt = 1e-3,
                                              std::optional<double> xi_mass_cap = kDefaultXiMassCap);

// w_{k+1} <= w_k + 2 * floor for consecutive rows.
bool residuals_non_increasing(const std::vector<ResidualRow>& rows, double floor);

void write_trajectory_csv(const Trajectory& traj, std::ostream& out, Eigen::Index stride = 1);
void write_measure_csv(const DiscreteMeasure& measure, const Grid& grid, std::ostream& out,
                       bool skip_zero = true);

}  // namespace occlp
