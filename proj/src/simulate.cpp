#include "occlp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace occlp {

const char* to_string(Policy::Kind kind) {
  switch (kind) {
    case Policy::Kind::Constant: return "constant";
    case Policy::Kind::Schedule: return "schedule";
    case Policy::Kind::FeedbackTable: return "feedback-table";
    case Policy::Kind::FeedbackExpression: return "feedback-expression";
    case Policy::Kind::Periodic: return "periodic";
    case Policy::Kind::SteerThenHold: return "steer-then-hold";
  }
  return "unknown";
}

namespace {

std::string vec_text(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ']';
  return os.str();
}

void require_dim(const ControlRegion& controls, Eigen::Index rows, const char* what) {
  if (rows != controls.dim()) {
    throw std::invalid_argument(std::string(what) + ": control dimension " + std::to_string(rows) +
                                " does not match control region dimension " + std::to_string(controls.dim()));
  }
}

}  // namespace

Policy Policy::constant(const ControlRegion& controls, Eigen::VectorXd u) {
  require_dim(controls, u.size(), "constant policy");
  Eigen::VectorXd value = controls.project(u);
  return Policy(Kind::Constant, "constant " + vec_text(value), [value]() -> Controller {
    return [value](double, const VectorRef&) { return value; };
  });
}

Policy Policy::schedule(const ControlRegion& controls, Eigen::VectorXd times, Eigen::MatrixXd values) {
  if (times.size() == 0 || times.size() != values.cols()) {
    throw std::invalid_argument("schedule policy: need one control column per breakpoint");
  }
  require_dim(controls, values.rows(), "schedule policy");
  for (Eigen::Index i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw std::invalid_argument("schedule policy: breakpoints must increase");
  }
  for (Eigen::Index i = 0; i < values.cols(); ++i) values.col(i) = controls.project(values.col(i));
  std::string text = "schedule with " + std::to_string(times.size()) + " pieces";
  return Policy(Kind::Schedule, text, [times, values]() -> Controller {
    return [times, values](double t, const VectorRef&) -> Eigen::VectorXd {
      const double* begin = times.data();
      const double* it = std::upper_bound(begin, begin + times.size(), t);
      const Eigen::Index piece = std::max<Eigen::Index>(0, (it - begin) - 1);
      return values.col(piece);
    };
  });
}

Policy Policy::feedback_table(const ControlRegion& controls, Eigen::MatrixXd cell_states, Eigen::MatrixXd values) {
  if (cell_states.cols() == 0 || cell_states.cols() != values.cols()) {
    throw std::invalid_argument("feedback table: need one control column per cell");
  }
  require_dim(controls, values.rows(), "feedback table");
  for (Eigen::Index i = 0; i < values.cols(); ++i) values.col(i) = controls.project(values.col(i));
  std::string text = "feedback table with " + std::to_string(cell_states.cols()) + " cells";
  return Policy(Kind::FeedbackTable, text, [cell_states, values]() -> Controller {
    return [cell_states, values](double, const VectorRef& y) -> Eigen::VectorXd {
      Eigen::Index best = 0;
      (cell_states.colwise() - y).colwise().squaredNorm().minCoeff(&best);
      return values.col(best);
    };
  });
}

Policy Policy::feedback_expression(const ControlRegion& controls, std::vector<Expression> laws) {
  require_dim(controls, static_cast<Eigen::Index>(laws.size()), "feedback expression");
  std::string text = "feedback";
  for (const auto& e : laws) {
    if (e.max_control_index() > 0) throw std::invalid_argument("feedback law may not reference controls");
    text += " [" + e.text() + "]";
  }
  return Policy(Kind::FeedbackExpression, text, [controls, laws]() -> Controller {
    return [controls, laws](double, const VectorRef& y) -> Eigen::VectorXd {
      Eigen::VectorXd u(static_cast<Eigen::Index>(laws.size()));
      for (std::size_t i = 0; i < laws.size(); ++i) u[static_cast<Eigen::Index>(i)] = laws[i](y);
      return controls.project(u);
    };
  });
}

Policy Policy::periodic(const Policy& base, double period) {
  if (!(period > 0.0)) throw std::invalid_argument("periodic policy: period must be positive");
  std::ostringstream text;
  text << "periodic(" << period << ") of " << base.description();
  return Policy(Kind::Periodic, text.str(), [base, period]() -> Controller {
    Controller inner = base.start();
    return [inner, period](double t, const VectorRef& y) { return inner(std::fmod(t, period), y); };
  });
}

Policy Policy::steer_then_hold(const ControlRegion& controls, Eigen::VectorXd steer, Eigen::VectorXd target,
                               Eigen::VectorXd hold, double capture_radius) {
  require_dim(controls, steer.size(), "steer-then-hold");
  require_dim(controls, hold.size(), "steer-then-hold");
  if (!(capture_radius > 0.0)) throw std::invalid_argument("steer-then-hold: capture radius must be positive");
  steer = controls.project(steer);
  hold = controls.project(hold);
  std::string text = "steer " + vec_text(steer) + " to " + vec_text(target) + " then hold " + vec_text(hold);
  return Policy(Kind::SteerThenHold, text, [steer, target, hold, capture_radius]() -> Controller {
    auto captured = std::make_shared<bool>(false);
    return [=](double, const VectorRef& y) -> Eigen::VectorXd {
      if (!*captured && y.size() == target.size() && (y - target).norm() <= capture_radius) *captured = true;
      return *captured ? hold : steer;
    };
  });
}

bool Trajectory::fully_in_region() const {
  return std::all_of(in_region.begin(), in_region.end(), [](char c) { return c != 0; });
}

Eigen::VectorXd rk4_step(const SystemSpec& spec, const VectorRef& y, const VectorRef& u, double h) {
  const Eigen::VectorXd k1 = spec.dynamics(y, u);
  const Eigen::VectorXd k2 = spec.dynamics(y + 0.5 * h * k1, u);
  const Eigen::VectorXd k3 = spec.dynamics(y + 0.5 * h * k2, u);
  const Eigen::VectorXd k4 = spec.dynamics(y + h * k3, u);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace {

long step_count(double T, double dt) {
  if (!(T > 0.0) || !(dt > 0.0)) throw std::invalid_argument("integration needs T > 0 and dt > 0");
  // Guard against T/dt landing a hair above an integer through rounding.
  return std::max(1L, static_cast<long>(std::ceil(T / dt - 1e-9)));
}

void check_finite(const Eigen::VectorXd& y, long step, double t) {
  if (!y.allFinite()) {
    std::ostringstream os;
    os << "non-finite state at step " << step << " (t = " << t << ")";
    throw std::runtime_error(os.str());
  }
}

}  // namespace

Trajectory integrate(const SystemSpec& spec, const VectorRef& y0, const Policy& policy, double T, double dt) {
  if (y0.size() != spec.dim_state) throw std::invalid_argument("integrate: y0 has the wrong dimension");
  if (!spec.region.contains(y0)) throw std::invalid_argument("integrate: y0 lies outside the state region");
  const long n = step_count(T, dt);
  Trajectory traj;
  traj.dt = dt;
  traj.system_name = spec.name;
  traj.times.resize(n + 1);
  traj.states.resize(spec.dim_state, n + 1);
  traj.controls.resize(spec.dim_control, n);
  traj.in_region.assign(static_cast<std::size_t>(n + 1), 1);
  Controller control = policy.start();
  Eigen::VectorXd y = y0;
  traj.times[0] = 0.0;
  traj.states.col(0) = y;
  for (long i = 0; i < n; ++i) {
    const double t = i * dt;
    const double h = (i + 1 == n) ? T - t : dt;
    const Eigen::VectorXd u = control(t, y);
    traj.controls.col(i) = u;
    y = rk4_step(spec, y, u, h);
    check_finite(y, i + 1, t + h);
    traj.times[i + 1] = (i + 1 == n) ? T : (i + 1) * dt;
    traj.states.col(i + 1) = y;
    traj.in_region[static_cast<std::size_t>(i + 1)] = spec.region.contains(y) ? 1 : 0;
  }
  return traj;
}

double cesaro_value(const Trajectory& traj, const SystemSpec& spec) {
  if (traj.steps() == 0) throw std::invalid_argument("cesaro_value: empty trajectory");
  if (!traj.fully_in_region()) throw std::domain_error("cesaro_value: trajectory leaves the state region");
  double integral = 0.0;
  for (Eigen::Index i = 0; i < traj.steps(); ++i) {
    const double h = traj.times[i + 1] - traj.times[i];
    const auto u = traj.controls.col(i);
    integral += 0.5 * h * (spec.cost(traj.states.col(i), u) + spec.cost(traj.states.col(i + 1), u));
  }
  return integral / traj.horizon();
}

double abel_horizon(double lambda, double bound_k, double tail_tolerance) {
  if (!(lambda > 0.0) || !(tail_tolerance > 0.0)) throw std::invalid_argument("abel_horizon: bad arguments");
  if (bound_k <= tail_tolerance) return 0.0;
  return std::log(bound_k / tail_tolerance) / lambda;
}

AbelResult abel_value(const SystemSpec& spec, const VectorRef& y0, const Policy& policy, double lambda,
                      double horizon, double tail_tolerance, double dt) {
  if (!(lambda > 0.0)) throw std::invalid_argument("abel_value: lambda must be positive");
  AbelResult result;
  result.horizon = horizon;
  result.tail_bound = std::exp(-lambda * horizon) * spec.bound_k;
  if (result.tail_bound > tail_tolerance * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "abel_value: horizon " << horizon << " leaves tail " << result.tail_bound << " > " << tail_tolerance
       << "; need H >= " << abel_horizon(lambda, spec.bound_k, tail_tolerance);
    throw std::invalid_argument(os.str());
  }
  if (!spec.region.contains(y0)) throw std::invalid_argument("abel_value: y0 lies outside the state region");
  const long n = step_count(horizon, dt);
  Controller control = policy.start();
  Eigen::VectorXd y = y0;
  double sum = 0.0;
  for (long i = 0; i < n; ++i) {
    const double t = i * dt;
    const double h = (i + 1 == n) ? horizon - t : dt;
    const Eigen::VectorXd u = control(t, y);
    const double k_left = spec.cost(y, u);
    y = rk4_step(spec, y, u, h);
    check_finite(y, i + 1, t + h);
    if (!spec.region.contains(y)) throw std::domain_error("abel_value: trajectory leaves the state region");
    const double k_right = spec.cost(y, u);
    // Exact weights of lambda e^{-lambda s} against the linear interpolant of k on the step.
    const double decay = std::exp(-lambda * t);
    const double step_mass = -std::expm1(-lambda * h);
    const double w_right = lambda * h > 1e-8 ? step_mass / (lambda * h) - std::exp(-lambda * h)
                                             : 0.5 * lambda * h;
    sum += decay * ((step_mass - w_right) * k_left + w_right * k_right);
  }
  result.value = sum;
  result.steps = n;
  return result;
}

DiscreteMeasure empirical_occupational_measure(const Trajectory& traj, const Grid& grid) {
  if (traj.steps() == 0) throw std::invalid_argument("empirical measure of an empty trajectory");
  DiscreteMeasure m = DiscreteMeasure::zero(grid);
  const double T = traj.horizon();
  for (Eigen::Index i = 0; i < traj.steps(); ++i) {
    const double h = traj.times[i + 1] - traj.times[i];
    m.weights[grid.nearest_atom(traj.states.col(i), traj.controls.col(i))] += h / T;
  }
  return m;
}

DiscreteMeasure DiscountedMeasure::normalized() const {
  DiscreteMeasure m = measure;
  const double mass = m.mass();
  if (mass > 0.0) m.weights /= mass;
  return m;
}

DiscountedMeasure empirical_discounted_measure(const Trajectory& traj, double lambda, const Grid& grid,
                                               double tail_tolerance) {
  if (!(lambda > 0.0)) throw std::invalid_argument("discounted measure: lambda must be positive");
  if (traj.steps() == 0) throw std::invalid_argument("discounted measure of an empty trajectory");
  DiscountedMeasure out;
  out.tail_mass = std::exp(-lambda * traj.horizon());
  if (out.tail_mass > tail_tolerance * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "discounted measure: horizon " << traj.horizon() << " leaves tail mass " << out.tail_mass << " > "
       << tail_tolerance;
    throw std::invalid_argument(os.str());
  }
  out.measure = DiscreteMeasure::zero(grid);
  for (Eigen::Index i = 0; i < traj.steps(); ++i) {
    const double t = traj.times[i];
    const double h = traj.times[i + 1] - t;
    out.measure.weights[grid.nearest_atom(traj.states.col(i), traj.controls.col(i))] +=
        std::exp(-lambda * t) * -std::expm1(-lambda * h);
  }
  return out;
}

PolicyFamily rotation_cosine_family(const SystemSpec& spec, std::vector<double> deltas) {
  if (!spec.region.is_annulus()) throw std::invalid_argument("rotation family needs an annulus region");
  const Eigen::Vector2d c = spec.region.as_annulus().center;
  PolicyFamily family;
  family.label = "u(theta) = delta + (1 - delta)(1 + cos theta)/2";
  family.parameters = std::move(deltas);
  ControlRegion controls = spec.control_region;
  family.make = [controls, c](double delta) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.17g + (1 - %.17g) * (1 + (y1 - %.17g) / sqrt((y1 - %.17g)^2 + (y2 - %.17g)^2)) / 2",
                  delta, delta, c.x(), c.x(), c.y());
    return Policy::feedback_expression(controls, {Expression::parse(buf)});
  };
  return family;
}

PolicyFamily constant_family(const SystemSpec& spec, const Eigen::MatrixXd& controls) {
  PolicyFamily family;
  family.label = "constant controls";
  for (Eigen::Index i = 0; i < controls.cols(); ++i) family.parameters.push_back(static_cast<double>(i));
  ControlRegion region = spec.control_region;
  family.make = [region, controls](double index) {
    return Policy::constant(region, controls.col(static_cast<Eigen::Index>(index)));
  };
  return family;
}

namespace {

// Golden-section minimisation of g on [a, b].
template <typename F>
double golden_min(F g, double a, double b, int iterations = 80) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = g(x1), f2 = g(x2);
  for (int i = 0; i < iterations && b - a > 1e-14; ++i) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = g(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = g(x2);
    }
  }
  return 0.5 * (a + b);
}

PeriodicCandidate search_candidate(const SystemSpec& spec, const Eigen::VectorXd& y0, const Policy& policy,
                                   const PeriodicSearchOptions& opt) {
  PeriodicCandidate cand;
  const double dt = opt.dt;
  Controller control = policy.start();

  const Eigen::VectorXd u0 = control(0.0, y0);
  if (spec.dynamics(y0, u0).norm() <= 1e-12) {
    // A rest point: every period closes trivially.
    cand.stationary = true;
    cand.closed = true;
    cand.period = 1.0;
    const Trajectory traj = integrate(spec, y0, policy, cand.period, dt);
    cand.closure_error = (traj.states.col(traj.states.cols() - 1) - y0).norm();
    cand.value = cesaro_value(traj, spec);
    return cand;
  }

  const double near = std::max(10.0 * opt.closure_tolerance, 2.0 * spec.bound_f * dt);
  const long max_steps = static_cast<long>(std::ceil(opt.max_period / dt));
  Eigen::VectorXd y_prev = y0, y = y0;
  Eigen::VectorXd u_prev = u0;
  double d_prev2 = 0.0, d_prev = 0.0;
  bool departed = false;
  control = policy.start();
  for (long i = 0; i < max_steps; ++i) {
    const double t = i * dt;
    const Eigen::VectorXd u = control(t, y);
    const Eigen::VectorXd y_next = rk4_step(spec, y, u, dt);
    check_finite(y_next, i + 1, t + dt);
    const double d = (y_next - y0).norm();
    if (!departed && d > near) departed = true;
    if (departed && i >= 2 && d_prev <= near && d_prev <= d_prev2 && d_prev <= d) {
      // Minimum bracketed on [t - dt, t + dt]; the minimiser is one of the two adjacent steps.
      const double t_left = t - dt;
      const Eigen::VectorXd y_left = y_prev, u_left = u_prev, y_mid = y, u_mid = u;
      auto dist = [&](double tau) {
        const Eigen::VectorXd s = tau <= t ? rk4_step(spec, y_left, u_left, tau - t_left)
                                           : rk4_step(spec, y_mid, u_mid, tau - t);
        return (s - y0).norm();
      };
      cand.period = golden_min(dist, t_left, t + dt);
      const long n = std::max(1L, static_cast<long>(std::ceil(cand.period / dt - 1e-9)));
      const Trajectory traj = integrate(spec, y0, policy, cand.period, cand.period / static_cast<double>(n));
      cand.closure_error = (traj.states.col(traj.states.cols() - 1) - y0).norm();
      cand.closed = cand.closure_error <= opt.closure_tolerance;
      cand.value = cesaro_value(traj, spec);
      return cand;
    }
    d_prev2 = d_prev;
    d_prev = d;
    y_prev = y;
    u_prev = u;
    y = y_next;
  }
  cand.closed = false;
  cand.closure_error = std::numeric_limits<double>::infinity();
  return cand;
}

}  // namespace

PeriodicSearchResult periodic_value_search(const SystemSpec& spec, const VectorRef& y0, const PolicyFamily& family,
                                           const PeriodicSearchOptions& options) {
  if (family.parameters.empty()) throw std::invalid_argument("periodic search: empty policy family");
  PeriodicSearchResult result;
  const Eigen::VectorXd start = y0;
  for (double p : family.parameters) {
    PeriodicCandidate c = search_candidate(spec, start, family.make(p), options);
    c.parameter = p;
    result.candidates.push_back(c);
  }
  double best = std::numeric_limits<double>::infinity();
  double last = std::numeric_limits<double>::infinity();
  result.strictly_decreasing = true;
  for (std::size_t i = 0; i < result.candidates.size(); ++i) {
    const auto& c = result.candidates[i];
    if (!c.closed) continue;
    if (!(c.value < last)) result.strictly_decreasing = false;
    last = c.value;
    if (c.value < best) {
      best = c.value;
      result.best = static_cast<Eigen::Index>(i);
    }
  }
  if (result.best < 0) throw std::runtime_error("periodic search: no candidate closed its loop");
  return result;
}

std::vector<ResidualRow> residual_decay_study(const SystemSpec& spec, const VectorRef& y0, const Policy& policy,
                                              const std::vector<double>& T_list, const Grid& grid,
                                              const BasisSpec& basis, double dt,
                                              std::optional<double> xi_mass_cap) {
  for (std::size_t i = 1; i < T_list.size(); ++i) {
    if (!(T_list[i] > T_list[i - 1])) throw std::invalid_argument("residual study: T list must increase");
  }
  std::vector<ResidualRow> rows;
  for (double T : T_list) {
    const Trajectory traj = integrate(spec, y0, policy, T, dt);
    const DiscreteMeasure gamma = empirical_occupational_measure(traj, grid);
    const MembershipResidual r = membership_residual(gamma, grid, basis, spec, y0, xi_mass_cap);
    rows.push_back({T, r.w_residual, r.omega_residual});
  }
  return rows;
}

bool residuals_non_increasing(const std::vector<ResidualRow>& rows, double floor) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].w_residual > rows[i - 1].w_residual + 2.0 * floor) return false;
  }
  return true;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out, Eigen::Index stride) {
  if (stride < 1) throw std::invalid_argument("trajectory stride must be >= 1");
  out << 't';
  for (Eigen::Index i = 0; i < traj.states.rows(); ++i) out << ",y" << i + 1;
  for (Eigen::Index i = 0; i < traj.controls.rows(); ++i) out << ",u" << i + 1;
  out << ",in_region\n";
  char buf[40];
  const Eigen::Index last = traj.states.cols() - 1;
  for (Eigen::Index j = 0; j <= last; ++j) {
    if (j % stride != 0 && j != last) continue;
    std::snprintf(buf, sizeof(buf), "%.12g", traj.times[j]);
    out << buf;
    for (Eigen::Index i = 0; i < traj.states.rows(); ++i) {
      std::snprintf(buf, sizeof(buf), ",%.12g", traj.states(i, j));
      out << buf;
    }
    const Eigen::Index c = std::min(j, traj.controls.cols() - 1);
    for (Eigen::Index i = 0; i < traj.controls.rows(); ++i) {
      std::snprintf(buf, sizeof(buf), ",%.12g", traj.controls(i, c));
      out << buf;
    }
    out << ',' << int(traj.in_region[static_cast<std::size_t>(j)]) << '\n';
  }
}

void write_measure_csv(const DiscreteMeasure& measure, const Grid& grid, std::ostream& out, bool skip_zero) {
  if (measure.weights.size() != grid.size()) throw std::invalid_argument("measure/grid size mismatch");
  out << "atom";
  for (Eigen::Index i = 0; i < grid.states().rows(); ++i) out << ",y" << i + 1;
  for (Eigen::Index i = 0; i < grid.controls().rows(); ++i) out << ",u" << i + 1;
  out << ",weight\n";
  char buf[40];
  for (Eigen::Index a = 0; a < grid.size(); ++a) {
    if (skip_zero && measure.weights[a] == 0.0) continue;
    out << a;
    for (Eigen::Index i = 0; i < grid.states().rows(); ++i) {
      std::snprintf(buf, sizeof(buf), ",%.12g", grid.states()(i, a));
      out << buf;
    }
    for (Eigen::Index i = 0; i < grid.controls().rows(); ++i) {
      std::snprintf(buf, sizeof(buf), ",%.12g", grid.controls()(i, a));
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.17g", measure.weights[a]);
    out << buf << '\n';
  }
}

}  // namespace occlp
