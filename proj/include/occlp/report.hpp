#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace occlp {

inline constexpr const char* kReportSchema = "occlp-report/1";
inline constexpr const char* kToolVersion = "0.1.0";

struct ValueEntry {
  std::string label;
  std::string kind;     // lp | simulation | oracle | diagnostic
  std::string variant;  // ergodic, nonergodic, ..., cesaro, abel, oracle-level, ...
  std::string parameter_name;
  double parameter = 0.0;
  std::string status;
  double value = 0.0;
  bool has_mu = false;
  double mu = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
  double xi_mass = 0.0;
  bool cap_binding = false;
  double error_bound = 0.0;
  std::string note;

  bool operator==(const ValueEntry&) const = default;
};

struct CertificateEntry {
  std::string label;
  double mu = 0.0;
  double cost_shift = 0.0;
  double flow_floor = 0.0;
  std::vector<double> psi;
  std::vector<double> eta;
  double min_cost_slack = 0.0;
  double min_flow_slack = 0.0;
  bool has_offgrid = false;
  int offgrid_points = 0;
  double offgrid_min_cost_slack = 0.0;
  double offgrid_min_flow_slack = 0.0;
  bool passed = false;

  bool operator==(const CertificateEntry&) const = default;
};

struct MeasureAtom {
  std::int64_t atom = 0;
  std::vector<double> y;
  std::vector<double> u;
  double weight = 0.0;

  bool operator==(const MeasureAtom&) const = default;
};

struct MeasureEntry {
  std::string label;
  std::uint64_t grid_fingerprint = 0;
  std::vector<MeasureAtom> atoms;  // nonzero weights only

  bool operator==(const MeasureEntry&) const = default;
};

// Plot-ready table: the first column is the sweep variable.
struct SweepTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  bool monotone = false;
  std::string note;

  bool operator==(const SweepTable&) const = default;
};

struct CheckEntry {
  std::string name;
  bool passed = false;
  std::string detail;

  bool operator==(const CheckEntry&) const = default;
};

struct TrajectoryEntry {
  std::string label;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  bool operator==(const TrajectoryEntry&) const = default;
};

struct ReportBundle {
  std::string schema = kReportSchema;
  std::string study;
  nlohmann::json config;
  nlohmann::json environment;
  int basis_degree = 0;
  std::vector<ValueEntry> values;
  std::vector<CertificateEntry> certificates;
  std::vector<MeasureEntry> measures;
  std::vector<SweepTable> sweeps;
  std::vector<CheckEntry> checks;
  std::vector<TrajectoryEntry> trajectories;

  bool all_passed() const;
  std::vector<std::string> failures() const;
  const ValueEntry* find_value(const std::string& label) const;
  const SweepTable* find_sweep(const std::string& name) const;

  bool operator==(const ReportBundle&) const = default;
};

nlohmann::json to_json(const ReportBundle& bundle);
ReportBundle bundle_from_json(const nlohmann::json& j);

// json: <dir>/report.json. csv-dir: values.csv, duals.csv, checks.csv, measures/*.csv,
// sweeps/*.csv (+ .dat x/y pairs) and trajectories/*.csv; empty groups get no directory.
void emit_report(const ReportBundle& bundle, const std::string& format, const std::string& dir);

}  // namespace occlp
