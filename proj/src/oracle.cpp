#include "occlp/oracle.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "occlp/grid.hpp"

namespace occlp {

const char* to_string(OracleMethod method) {
  switch (method) {
    case OracleMethod::Analytic: return "analytic";
    case OracleMethod::ExhaustiveAtomScan: return "exhaustive-atom-scan";
    case OracleMethod::DenseSimulation: return "dense-simulation";
  }
  return "unknown";
}

namespace {

// Largest |grad_y k| over the sampled points.
double state_lipschitz(const Expression& k, int dim, const Eigen::MatrixXd& ys, const Eigen::MatrixXd& us) {
  std::vector<Expression> partials;
  for (int i = 0; i < dim; ++i) partials.push_back(k.derivative_state(i));
  double lip = 0.0;
  for (Eigen::Index a = 0; a < ys.cols(); ++a) {
    for (Eigen::Index b = 0; b < us.cols(); ++b) {
      double s = 0.0;
      for (const auto& p : partials) s += std::pow(p(ys.col(a), us.col(b)), 2);
      lip = std::max(lip, std::sqrt(s));
    }
  }
  return lip;
}

}  // namespace

OracleResult rotation_level_value(double z, const std::string& cost_id, int angle_resolution,
                                  int control_resolution, const RotationOracleOptions& options) {
  const double a2 = options.inner * options.inner, b2 = options.outer * options.outer;
  if (z < a2 - 1e-12 || z > b2 + 1e-12) {
    std::ostringstream os;
    os << "rotation oracle: level z = " << z << " outside [" << a2 << ", " << b2 << "]";
    throw std::invalid_argument(os.str());
  }
  if (angle_resolution < 1 || control_resolution < 1) throw std::invalid_argument("rotation oracle: bad resolution");
  if (!options.stationary_family && !options.uniform_family) {
    throw std::invalid_argument("rotation oracle: no measure family selected");
  }
  const Expression k = resolve_cost(cost_id);
  const double r = std::sqrt(std::max(z, 0.0));
  Eigen::MatrixXd ys(2, angle_resolution);
  for (int j = 0; j < angle_resolution; ++j) {
    const double theta = 2.0 * M_PI * j / angle_resolution;
    ys.col(j) << r * std::cos(theta), r * std::sin(theta);
  }
  const Eigen::VectorXd u_axis = axis_points(options.control_lower, options.control_upper, control_resolution,
                                             Placement::Nodes);

  OracleResult result;
  std::ostringstream name;
  name << "rotation level z=" << z << " cost=" << cost_id << " n_theta=" << angle_resolution
       << " n_u=" << control_resolution;
  result.instance = name.str();
  result.method = OracleMethod::ExhaustiveAtomScan;
  result.value = std::numeric_limits<double>::infinity();

  if (options.stationary_family) {
    if (options.control_lower > 0.0 || options.control_upper < 0.0) {
      throw std::invalid_argument("rotation oracle: u = 0 is not an admissible control");
    }
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
    for (int j = 0; j < angle_resolution; ++j) {
      const double v = k(ys.col(j), zero);
      if (v < result.value) {
        result.value = v;
        result.attained_by = "stationary-dirac";
        result.argmin_state = ys.col(j);
        result.argmin_control = zero;
      }
    }
  }
  if (options.uniform_family) {
    for (Eigen::Index i = 0; i < u_axis.size(); ++i) {
      const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, u_axis[i]);
      double mean = 0.0;
      for (int j = 0; j < angle_resolution; ++j) mean += k(ys.col(j), u);
      mean /= angle_resolution;
      if (mean < result.value) {
        result.value = mean;
        result.attained_by = "uniform-circle";
        result.argmin_state = Eigen::VectorXd();
        result.argmin_control = u;
      }
    }
  }

  // Angular gap pi r / n_theta times Lip_y(k), plus half a control step times the control slope.
  Eigen::MatrixXd us(1, u_axis.size());
  us.row(0) = u_axis.transpose();
  double bound = state_lipschitz(k, 2, ys, us) * M_PI * r / angle_resolution;
  if (u_axis.size() > 1) {
    const double du = u_axis[1] - u_axis[0];
    double slope = 0.0;
    for (int j = 0; j < angle_resolution; ++j) {
      for (Eigen::Index i = 0; i + 1 < u_axis.size(); ++i) {
        slope = std::max(slope, std::abs(k(ys.col(j), us.col(i + 1)) - k(ys.col(j), us.col(i))) / du);
      }
    }
    bound += 0.5 * du * slope;
  }
  result.error_bound = bound;
  return result;
}

OracleResult frozen_value(const SystemSpec& spec, const VectorRef& y0, int control_resolution) {
  if (y0.size() != spec.dim_state) throw std::invalid_argument("frozen oracle: y0 has the wrong dimension");
  Eigen::MatrixXd controls;
  double half_step_slope = 0.0;
  const ControlRegion& cr = spec.control_region;
  if (cr.is_finite()) {
    controls = cr.points();
  } else {
    if (control_resolution < 1) throw std::invalid_argument("frozen oracle: bad control resolution");
    const int k = cr.dim();
    Eigen::Index total = 1;
    for (int i = 0; i < k; ++i) total *= control_resolution;
    controls.resize(k, total);
    std::vector<Eigen::VectorXd> axes;
    for (int i = 0; i < k; ++i) {
      axes.push_back(axis_points(cr.lower()[i], cr.upper()[i], control_resolution, Placement::Nodes));
    }
    for (Eigen::Index c = 0; c < total; ++c) {
      Eigen::Index rest = c;
      for (int i = k - 1; i >= 0; --i) {
        controls(i, c) = axes[static_cast<std::size_t>(i)][rest % control_resolution];
        rest /= control_resolution;
      }
    }
    // Slope estimate along each axis between neighbouring nodes.
    if (control_resolution > 1) {
      for (Eigen::Index c = 0; c < total; ++c) {
        for (int i = 0; i < k; ++i) {
          const double step = axes[static_cast<std::size_t>(i)][1] - axes[static_cast<std::size_t>(i)][0];
          if (step <= 0.0) continue;
          Eigen::VectorXd u = controls.col(c);
          if (u[i] + step > cr.upper()[i] + 1e-12) continue;
          Eigen::VectorXd v = u;
          v[i] += step;
          const double s = std::abs(spec.cost(y0, v) - spec.cost(y0, u)) / step;
          half_step_slope = std::max(half_step_slope, 0.5 * step * s);
        }
      }
    }
  }
  OracleResult result;
  result.instance = "frozen " + spec.name + " cost=" + spec.cost_id;
  result.method = OracleMethod::ExhaustiveAtomScan;
  result.value = std::numeric_limits<double>::infinity();
  result.argmin_state = y0;
  for (Eigen::Index c = 0; c < controls.cols(); ++c) {
    const double v = spec.cost(y0, controls.col(c));
    if (v < result.value) {
      result.value = v;
      result.argmin_control = controls.col(c);
    }
  }
  result.attained_by = "constant-control";
  result.error_bound = half_step_slope * std::max(1, cr.dim());
  return result;
}

LevelSetTable level_set_ordering(const std::string& cost_id, const std::vector<double>& z_grid,
                                 int angle_resolution, int control_resolution,
                                 const RotationOracleOptions& options) {
  if (z_grid.empty()) throw std::invalid_argument("level-set ordering: empty z grid");
  LevelSetTable table;
  table.min_value = std::numeric_limits<double>::infinity();
  for (double z : z_grid) {
    const OracleResult r = rotation_level_value(z, cost_id, angle_resolution, control_resolution, options);
    table.z.push_back(z);
    table.values.push_back(r.value);
    if (r.value < table.min_value) {
      table.min_value = r.value;
      table.argmin_z = z;
    }
  }
  return table;
}

}  // namespace occlp
