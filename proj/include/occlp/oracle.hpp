#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "occlp/system.hpp"

namespace occlp {

enum class OracleMethod { Analytic, ExhaustiveAtomScan, DenseSimulation };
const char* to_string(OracleMethod method);

struct OracleResult {
  std::string instance;
  double value = 0.0;
  OracleMethod method = OracleMethod::ExhaustiveAtomScan;
  double error_bound = 0.0;
  std::string attained_by;
  Eigen::VectorXd argmin_state;
  Eigen::VectorXd argmin_control;
};

struct RotationOracleOptions {
  double inner = 0.5;
  double outer = 1.5;
  double control_lower = -1.0;
  double control_upper = 1.0;
  bool stationary_family = true;  // (i) Diracs at (theta, u = 0)
  bool uniform_family = true;     // (ii) uniform theta x any u-marginal
};

// Minimum of int k dgamma over the two tractable subfamilies of measures supported on
// the circle |y|^2 = z, scanned on a dense circle/control grid. Uses no LP.
OracleResult rotation_level_value(double z, const std::string& cost_id, int angle_resolution,
                                  int control_resolution, const RotationOracleOptions& options = {});

// min over the control grid (nodes, or the listed points of a finite set) of k(y0, u).
OracleResult frozen_value(const SystemSpec& spec, const VectorRef& y0, int control_resolution);

struct LevelSetTable {
  std::vector<double> z;
  std::vector<double> values;
  double min_value = 0.0;
  double argmin_z = 0.0;
};

// Per-level oracle values; the minimum over levels is the ergodic reference.
LevelSetTable level_set_ordering(const std::string& cost_id, const std::vector<double>& z_grid,
                                 int angle_resolution, int control_resolution,
                                 const RotationOracleOptions& options = {});

}  // namespace occlp
