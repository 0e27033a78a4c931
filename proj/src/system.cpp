#include "occlp/system.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace occlp {

namespace {

constexpr std::array<unsigned, 16> kPrimes = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

// Corners of a control box (2^k of them, k small) or the listed points of a finite set.
Eigen::MatrixXd control_extremes(const ControlRegion& controls) {
  if (controls.is_finite()) return controls.points();
  const int k = controls.dim();
  const int count = 1 << k;
  Eigen::MatrixXd out(k, count + 1);
  for (int c = 0; c < count; ++c) {
    for (int i = 0; i < k; ++i) out(i, c) = (c >> i) & 1 ? controls.upper()[i] : controls.lower()[i];
  }
  out.col(count) = 0.5 * (controls.lower() + controls.upper());
  return out;
}

Eigen::VectorXd map_unit_to_region(const StateRegion& region, const Eigen::VectorXd& h) {
  if (region.is_box()) {
    const auto& b = region.as_box();
    return b.lower.array() + h.array() * (b.upper - b.lower).array();
  }
  const auto& a = region.as_annulus();
  const double r = std::sqrt(a.inner * a.inner + h[0] * (a.outer * a.outer - a.inner * a.inner));
  const double t = 2.0 * std::numbers::pi * h[1];
  return a.center + r * Eigen::Vector2d(std::cos(t), std::sin(t));
}

double sampled_max(const SystemSpec& spec, const std::function<double(const VectorRef&, const VectorRef&)>& q) {
  double best = 0.0;
  const auto samples = sample_state_controls(spec, 4096);
  for (Eigen::Index i = 0; i < samples.states.cols(); ++i) {
    best = std::max(best, std::abs(q(samples.states.col(i), samples.controls.col(i))));
  }
  const Eigen::MatrixXd extremes = control_extremes(spec.control_region);
  for (const auto& p : sample_boundary(spec.region, 256)) {
    for (Eigen::Index j = 0; j < extremes.cols(); ++j) best = std::max(best, std::abs(q(p.state, extremes.col(j))));
  }
  return best;
}

void fill_bounds(SystemSpec& spec, bool dynamics_bound_known) {
  if (!dynamics_bound_known) {
    spec.bound_f = 1.01 * sampled_max(spec, [&](const VectorRef& y, const VectorRef& u) {
      return spec.dynamics(y, u).norm();
    }) + 1e-12;
  }
  spec.bound_k = 1.01 * sampled_max(spec, spec.cost) + 1e-12;
}

CostFn cost_from_expression(const Expression& e) {
  return [e](const VectorRef& y, const VectorRef& u) { return e(y, u); };
}

FirstIntegral first_integral_from_expression(const Expression& e, int dim) {
  std::vector<Expression> grad;
  for (int i = 0; i < dim; ++i) grad.push_back(e.derivative_state(i));
  FirstIntegral fi;
  fi.label = e.text();
  fi.value = [e](const VectorRef& y) { return e(y); };
  fi.gradient = [grad](const VectorRef& y) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(grad.size()));
    for (std::size_t i = 0; i < grad.size(); ++i) g[static_cast<Eigen::Index>(i)] = grad[i](y);
    return g;
  };
  return fi;
}

}  // namespace

double radical_inverse(unsigned index, unsigned base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * (index % base);
    index /= base;
    f /= base;
  }
  return result;
}

StateRegion StateRegion::box(Eigen::VectorXd lower, Eigen::VectorXd upper, double tolerance) {
  require(lower.size() == upper.size() && lower.size() > 0, "box bounds must have equal positive dimension");
  require((lower.array() < upper.array()).all(), "box lower bound must be below upper bound componentwise");
  require(tolerance >= 0.0, "membership tolerance must be nonnegative");
  return StateRegion(BoxShape{std::move(lower), std::move(upper)}, tolerance);
}

StateRegion StateRegion::annulus(double inner, double outer, Eigen::Vector2d center, double tolerance) {
  require(inner > 0.0 && inner < outer, "annulus radii must satisfy 0 < inner < outer");
  require(tolerance >= 0.0, "membership tolerance must be nonnegative");
  return StateRegion(AnnulusShape{inner, outer, center}, tolerance);
}

int StateRegion::dim() const { return is_box() ? static_cast<int>(as_box().lower.size()) : 2; }

double StateRegion::signed_distance(const VectorRef& y) const {
  if (y.size() != dim()) throw std::invalid_argument("state dimension does not match region");
  if (is_box()) {
    const auto& b = as_box();
    const Eigen::ArrayXd below = b.lower.array() - y.array();
    const Eigen::ArrayXd above = y.array() - b.upper.array();
    const Eigen::ArrayXd excess = below.max(above);
    if ((excess <= 0.0).all()) return excess.maxCoeff();
    return excess.max(0.0).matrix().norm();
  }
  const auto& a = as_annulus();
  const double r = (y - a.center).norm();
  return std::max(a.inner - r, r - a.outer);
}

BoxShape StateRegion::bounding_box() const {
  if (is_box()) return as_box();
  const auto& a = as_annulus();
  return BoxShape{a.center.array() - a.outer, a.center.array() + a.outer};
}

ControlRegion ControlRegion::box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  require(lower.size() == upper.size() && lower.size() > 0, "control bounds must have equal positive dimension");
  require((lower.array() <= upper.array()).all(), "control lower bound must not exceed upper bound");
  ControlRegion c;
  c.lower_ = std::move(lower);
  c.upper_ = std::move(upper);
  return c;
}

ControlRegion ControlRegion::finite(Eigen::MatrixXd points) {
  require(points.rows() > 0 && points.cols() > 0, "finite control set must be nonempty");
  ControlRegion c;
  c.is_finite_ = true;
  c.lower_ = points.rowwise().minCoeff();
  c.upper_ = points.rowwise().maxCoeff();
  c.points_ = std::move(points);
  return c;
}

bool ControlRegion::contains(const VectorRef& u, double tolerance) const {
  if (u.size() != dim()) return false;
  if (is_finite_) return ((points_.colwise() - u).colwise().norm().array() <= tolerance).any();
  return (u.array() >= lower_.array() - tolerance).all() && (u.array() <= upper_.array() + tolerance).all();
}

Eigen::VectorXd ControlRegion::project(const VectorRef& u) const {
  if (u.size() != dim()) throw std::invalid_argument("control dimension mismatch");
  if (is_finite_) {
    Eigen::Index best = 0;
    (points_.colwise() - u).colwise().squaredNorm().minCoeff(&best);
    return points_.col(best);
  }
  return u.cwiseMax(lower_).cwiseMin(upper_);
}

Eigen::VectorXd eval_dynamics(const SystemSpec& spec, const VectorRef& y, const VectorRef& u) {
  if (!spec.dynamics) throw std::invalid_argument("system '" + spec.name + "' has no dynamics evaluator");
  if (y.size() != spec.dim_state || u.size() != spec.dim_control) {
    throw std::invalid_argument("eval_dynamics: dimension mismatch for system '" + spec.name + "'");
  }
  return spec.dynamics(y, u);
}

double eval_cost(const SystemSpec& spec, const VectorRef& y, const VectorRef& u) {
  if (!spec.cost) throw std::invalid_argument("system '" + spec.name + "' has no cost evaluator");
  if (y.size() != spec.dim_state || u.size() != spec.dim_control) {
    throw std::invalid_argument("eval_cost: dimension mismatch for system '" + spec.name + "'");
  }
  return spec.cost(y, u);
}

DynamicsFn resolve_dynamics(const std::string& dynamics_id, int dim_state) {
  if (dynamics_id == "rotation") {
    require(dim_state == 2, "rotation dynamics are planar");
    return [](const VectorRef& y, const VectorRef& u) {
      Eigen::VectorXd f(2);
      f << u[0] * y[1], -u[0] * y[0];
      return f;
    };
  }
  if (dynamics_id == "frozen") {
    return [dim_state](const VectorRef&, const VectorRef&) { return Eigen::VectorXd::Zero(dim_state).eval(); };
  }
  if (dynamics_id == "scalar-drift") {
    require(dim_state == 1, "scalar-drift dynamics are one-dimensional");
    return [](const VectorRef& y, const VectorRef& u) {
      Eigen::VectorXd f(1);
      f << -y[0] + u[0];
      return f;
    };
  }
  throw std::invalid_argument("unknown dynamics_id '" + dynamics_id + "'");
}

Expression resolve_cost(const std::string& cost_id) {
  static const std::vector<std::pair<std::string, std::string>> aliases = {
      {"first-coordinate", "y1"},
      {"control-squared", "u1^2"},
      {"first-coordinate-plus-control-squared", "y1 + u1^2"},
      {"radius-squared", "y1^2 + y2^2"},
  };
  for (const auto& [name, text] : aliases) {
    if (name == cost_id) return Expression::parse(text);
  }
  try {
    return Expression::parse(cost_id);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("unknown cost_id '" + cost_id + "': " + e.what());
  }
}

SystemSpec make_rotation_system(double inner, double outer, const std::string& cost_id, double control_bound) {
  require(control_bound > 0.0, "control bound must be positive");
  SystemSpec spec;
  spec.name = "rotation";
  spec.dim_state = 2;
  spec.dim_control = 1;
  spec.dynamics_id = "rotation";
  spec.cost_id = cost_id;
  spec.region = StateRegion::annulus(inner, outer);
  spec.control_region = ControlRegion::box(Eigen::VectorXd::Constant(1, -control_bound),
                                           Eigen::VectorXd::Constant(1, control_bound));
  spec.dynamics = resolve_dynamics("rotation", 2);
  spec.cost = cost_from_expression(resolve_cost(cost_id));
  FirstIntegral radius;
  radius.label = "y1^2 + y2^2";
  radius.value = [](const VectorRef& y) { return y.squaredNorm(); };
  radius.gradient = [](const VectorRef& y) { return (2.0 * y).eval(); };
  spec.first_integrals.push_back(radius);
  // |f(y,u)| = |u| |y| exactly.
  spec.bound_f = control_bound * outer;
  fill_bounds(spec, true);
  return spec;
}

SystemSpec make_frozen_system(const std::string& cost_id, StateRegion region, ControlRegion controls) {
  SystemSpec spec;
  spec.name = "frozen";
  spec.dim_state = region.dim();
  spec.dim_control = controls.dim();
  spec.dynamics_id = "frozen";
  spec.cost_id = cost_id;
  spec.region = std::move(region);
  spec.control_region = std::move(controls);
  spec.dynamics = resolve_dynamics("frozen", spec.dim_state);
  spec.cost = cost_from_expression(resolve_cost(cost_id));
  spec.bound_f = 0.0;
  fill_bounds(spec, true);
  return spec;
}

SystemSpec make_scalar_drift_system(const std::string& cost_id) {
  SystemSpec spec;
  spec.name = "scalar-drift";
  spec.dim_state = 1;
  spec.dim_control = 1;
  spec.dynamics_id = "scalar-drift";
  spec.cost_id = cost_id;
  spec.region = StateRegion::box(Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0));
  spec.control_region = ControlRegion::box(Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0));
  spec.dynamics = resolve_dynamics("scalar-drift", 1);
  spec.cost = cost_from_expression(resolve_cost(cost_id));
  // |-y + u| <= 2 on [-1,1] x [-1,1].
  spec.bound_f = 2.0;
  fill_bounds(spec, true);
  return spec;
}

SystemSpec make_custom_system(const CustomSystemDecl& decl, StateRegion region, ControlRegion controls) {
  const int m = region.dim();
  const int k = controls.dim();
  require(static_cast<int>(decl.dynamics.size()) == m,
          "custom system '" + decl.name + "': need one dynamics expression per state component");
  std::vector<Expression> f;
  for (const auto& text : decl.dynamics) {
    auto e = Expression::parse(text);
    require(e.max_state_index() <= m && e.max_control_index() <= k,
            "dynamics expression '" + text + "' references variables beyond the declared dimensions");
    f.push_back(std::move(e));
  }
  const Expression cost = resolve_cost(decl.cost);
  require(cost.max_state_index() <= m && cost.max_control_index() <= k,
          "cost expression '" + decl.cost + "' references variables beyond the declared dimensions");

  SystemSpec spec;
  spec.name = decl.name;
  spec.dim_state = m;
  spec.dim_control = k;
  spec.dynamics_id = "expression";
  spec.cost_id = decl.cost;
  spec.region = std::move(region);
  spec.control_region = std::move(controls);
  spec.dynamics = [f](const VectorRef& y, const VectorRef& u) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(f.size()));
    for (std::size_t i = 0; i < f.size(); ++i) out[static_cast<Eigen::Index>(i)] = f[i](y, u);
    return out;
  };
  spec.cost = cost_from_expression(cost);
  for (const auto& text : decl.first_integrals) {
    auto e = Expression::parse(text);
    require(e.max_control_index() == 0, "first integral '" + text + "' must not depend on controls");
    require(e.max_state_index() <= m, "first integral '" + text + "' references states beyond the dimension");
    spec.first_integrals.push_back(first_integral_from_expression(e, m));
  }
  fill_bounds(spec, false);
  return spec;
}

StateControlSamples sample_state_controls(const SystemSpec& spec, int count) {
  require(count > 0, "sample count must be positive");
  const int m = spec.region.is_annulus() ? 2 : spec.dim_state;
  const bool finite = spec.control_region.is_finite();
  const int k = finite ? 1 : spec.dim_control;
  require(m + k <= static_cast<int>(kPrimes.size()), "too many dimensions for Halton sampling");

  StateControlSamples out{Eigen::MatrixXd(spec.dim_state, count), Eigen::MatrixXd(spec.dim_control, count)};
  Eigen::VectorXd h(m);
  for (int i = 0; i < count; ++i) {
    const auto index = static_cast<unsigned>(i + 1);
    for (int d = 0; d < m; ++d) h[d] = radical_inverse(index, kPrimes[d]);
    out.states.col(i) = map_unit_to_region(spec.region, h);
    if (finite) {
      const auto& pts = spec.control_region.points();
      const auto j = std::min<Eigen::Index>(
          pts.cols() - 1, static_cast<Eigen::Index>(radical_inverse(index, kPrimes[m]) * pts.cols()));
      out.controls.col(i) = pts.col(j);
    } else {
      for (int d = 0; d < k; ++d) {
        const double t = radical_inverse(index, kPrimes[m + d]);
        out.controls(d, i) = spec.control_region.lower()[d] +
                             t * (spec.control_region.upper()[d] - spec.control_region.lower()[d]);
      }
    }
  }
  return out;
}

std::vector<BoundaryPoint> sample_boundary(const StateRegion& region, int count) {
  require(count > 0, "boundary sample count must be positive");
  std::vector<BoundaryPoint> out;
  if (region.is_annulus()) {
    const auto& a = region.as_annulus();
    const int per_circle = std::max(1, count / 2);
    for (int i = 0; i < per_circle; ++i) {
      const double t = 2.0 * std::numbers::pi * (i + 0.5) / per_circle;
      const Eigen::Vector2d dir(std::cos(t), std::sin(t));
      out.push_back({a.center + a.outer * dir, dir});
      out.push_back({a.center + a.inner * dir, -dir});
    }
    return out;
  }
  const auto& b = region.as_box();
  const int m = static_cast<int>(b.lower.size());
  const int per_face = std::max(1, count / (2 * m));
  for (int axis = 0; axis < m; ++axis) {
    for (int side = 0; side < 2; ++side) {
      for (int i = 0; i < per_face; ++i) {
        Eigen::VectorXd y(m);
        int d = 0;
        for (int j = 0; j < m; ++j) {
          if (j == axis) continue;
          const double t = m == 1 ? 0.5 : radical_inverse(static_cast<unsigned>(i + 1), kPrimes[d++]);
          y[j] = b.lower[j] + t * (b.upper[j] - b.lower[j]);
        }
        y[axis] = side == 0 ? b.lower[axis] : b.upper[axis];
        Eigen::VectorXd n = Eigen::VectorXd::Zero(m);
        n[axis] = side == 0 ? -1.0 : 1.0;
        out.push_back({y, n});
      }
    }
  }
  return out;
}

FirstIntegralReport check_first_integrals(const SystemSpec& spec, int sample_count, double tolerance) {
  FirstIntegralReport report;
  const auto samples = sample_state_controls(spec, sample_count);
  report.samples = sample_count;
  for (const auto& fi : spec.first_integrals) {
    for (int i = 0; i < sample_count; ++i) {
      const Eigen::VectorXd f = spec.dynamics(samples.states.col(i), samples.controls.col(i));
      report.max_residual = std::max(report.max_residual, std::abs(fi.gradient(samples.states.col(i)).dot(f)));
    }
  }
  report.passed = report.max_residual <= tolerance;
  return report;
}

InvarianceReport check_forward_invariance(const SystemSpec& spec, int boundary_sample_count, double tolerance) {
  InvarianceReport report;
  report.max_outward = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd controls = control_extremes(spec.control_region);
  if (!spec.control_region.is_finite()) {
    const auto extra = sample_state_controls(spec, 16).controls;
    Eigen::MatrixXd all(controls.rows(), controls.cols() + extra.cols());
    all << controls, extra;
    controls = all;
  }
  for (const auto& p : sample_boundary(spec.region, boundary_sample_count)) {
    for (Eigen::Index j = 0; j < controls.cols(); ++j) {
      const double outward = spec.dynamics(p.state, controls.col(j)).dot(p.outward_normal);
      if (outward > report.max_outward) {
        report.max_outward = outward;
        report.worst_state = p.state;
        report.worst_control = controls.col(j);
      }
    }
  }
  report.passed = report.max_outward <= tolerance;
  return report;
}

}  // namespace occlp
