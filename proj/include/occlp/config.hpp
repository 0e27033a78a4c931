#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "occlp/grid.hpp"
#include "occlp/programs.hpp"
#include "occlp/system.hpp"

namespace occlp {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& message)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct SystemConfig {
  std::string name = "rotation";  // rotation | frozen | scalar-drift | custom
  std::optional<std::string> cost;  // system default when absent
  double inner = 0.5;
  double outer = 1.5;
  double control_bound = 1.0;
  std::string region = "box";  // custom systems: box | annulus
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> control_lower;
  std::vector<double> control_upper;
  std::vector<std::vector<double>> control_points;  // finite control set, one vector per point
  std::vector<std::string> dynamics;
  std::vector<std::string> first_integrals;
  std::optional<double> bound_f;
  std::optional<double> bound_k;

  bool operator==(const SystemConfig&) const = default;
};

struct GridConfig {
  std::vector<int> state_resolution;
  std::vector<int> control_resolution;
  Placement state_placement = Placement::Midpoint;
  Placement radial_placement = Placement::Nodes;
  Placement control_placement = Placement::Nodes;
  bool anchor_y0 = true;

  bool operator==(const GridConfig&) const = default;
};

struct BasisConfig {
  int max_degree = 4;

  bool operator==(const BasisConfig&) const = default;
};

struct ProgramConfig {
  std::vector<ProgramVariant> variants{ProgramVariant::NonErgodic};
  std::vector<double> y0;
  std::vector<double> lambda{0.1};
  std::vector<double> epsilon;
  bool xi_mass_cap_enabled = true;
  double xi_mass_cap = kDefaultXiMassCap;
  double tolerance = 1e-6;
  bool export_lp = false;

  bool operator==(const ProgramConfig&) const = default;
};

struct SimulateConfig {
  std::string policy = "none";  // none | constant | schedule | feedback | feedback-table | steer-then-hold
  std::vector<double> control;
  std::vector<double> steer;
  std::vector<double> target;
  std::vector<double> hold;
  double capture_radius = 1e-3;
  std::vector<std::string> feedback;
  std::vector<double> schedule_times;
  std::vector<std::vector<double>> schedule_controls;
  std::vector<std::vector<double>> table_states;
  std::vector<std::vector<double>> table_controls;
  double period = 0.0;  // > 0 wraps the policy periodically
  std::vector<double> T;
  double dt = 1e-3;
  std::vector<double> lambda;
  double abel_tail = 1e-3;
  double budget = 0.05;
  std::optional<double> residual_floor;

  bool operator==(const SimulateConfig&) const = default;
};

struct PeriodicConfig {
  bool enabled = false;
  std::string family = "rotation-cosine";  // rotation-cosine | constant
  std::vector<double> parameters;
  double max_period = 500.0;
  double closure_tolerance = 1e-3;
  std::optional<double> value_threshold;

  bool operator==(const PeriodicConfig&) const = default;
};

struct ConvergenceConfig {
  std::vector<std::vector<int>> state_resolutions;
  std::vector<int> degrees;
  double tolerance = 0.02;

  bool operator==(const ConvergenceConfig&) const = default;
};

struct OracleConfig {
  int angle_resolution = 512;
  int control_resolution = 0;  // 0: use the grid's control resolution
  std::vector<double> z;
  double tolerance = 0.05;

  bool operator==(const OracleConfig&) const = default;
};

struct OutputConfig {
  std::string format = "json";  // json | csv-dir
  std::string path = "occlp-report";
  bool trajectories = false;
  int trajectory_stride = 100;

  bool operator==(const OutputConfig&) const = default;
};

struct StudyConfig {
  std::uint64_t seed = 1;
  SystemConfig system;
  GridConfig grid;
  BasisConfig basis;
  ProgramConfig program;
  SimulateConfig simulate;
  PeriodicConfig periodic;
  ConvergenceConfig convergence;
  OracleConfig oracle;
  OutputConfig output;

  bool operator==(const StudyConfig&) const = default;
};

// Parses and validates; errors carry the offending line number.
StudyConfig parse_config(const std::string& text);
StudyConfig load_config(const std::string& path);

// Text in the config grammar that parses back to the same StudyConfig.
std::string format_config(const StudyConfig& config);
// Commented listing of every key with its default.
std::string default_config_text();

nlohmann::json config_to_json(const StudyConfig& config);

SystemSpec make_system(const StudyConfig& config);
Eigen::VectorXd config_y0(const StudyConfig& config);  // throws if absent
GridOptions make_grid_options(const StudyConfig& config, const SystemSpec& spec);

}  // namespace occlp
