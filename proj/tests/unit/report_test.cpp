#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "occlp/report.hpp"

using namespace occlp;
namespace fs = std::filesystem;

namespace {

ReportBundle sample_bundle() {
  ReportBundle b;
  b.study = "solve";
  b.config = {{"seed", 3}, {"program", {{"y0", {1.0, 0.0}}}}};
  b.environment = {{"tool", "occlp"}, {"version", kToolVersion}};
  b.basis_degree = 4;
  ValueEntry v;
  v.label = "nonergodic";
  v.kind = "lp";
  v.variant = "nonergodic";
  v.status = "optimal";
  v.value = -1.0 / 3.0;
  v.has_mu = true;
  v.mu = -0.33333333333333337;
  v.duality_gap = 1e-17;
  v.iterations = 231;
  v.note = "comma, and \"quotes\"";
  b.values.push_back(v);
  CertificateEntry c;
  c.label = "nonergodic";
  c.mu = v.mu;
  c.psi = {0.1, -2.5e-12, 3.0};
  c.eta = {1e300, -0.0};
  c.min_cost_slack = -1e-15;
  c.has_offgrid = true;
  c.offgrid_points = 28800;
  c.passed = true;
  b.certificates.push_back(c);
  b.measures.push_back({"gamma nonergodic", 0xfedcba9876543210ULL, {{17, {-1.0, 0.0}, {0.0}, 1.0}}});
  b.checks.push_back({"weak duality", true, ""});
  b.checks.push_back({"something else", false, "value 3"});
  return b;
}

SweepTable epsilon_table() {
  SweepTable t;
  t.name = "epsilon";
  t.columns = {"epsilon", "value", "xi_mass", "monotone_step"};
  t.rows = {{0.1, -0.43, 2.4, 1}, {0.01, -0.94, 2.4, 1}, {0.001, -0.99, 2.4, 1}};
  t.monotone = true;
  return t;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("occlp-report-test-" + name);
  fs::remove_all(p);
  return p;
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST(Report, JsonRoundTrip) {
  ReportBundle b = sample_bundle();
  b.sweeps.push_back(epsilon_table());
  b.trajectories.push_back({"cesaro T=1", {"t", "y1"}, {{0.0, 1.0}, {0.5, 0.87758256189037276}}});
  const nlohmann::json j = to_json(b);
  EXPECT_EQ(j["schema"], kReportSchema);
  const ReportBundle back = bundle_from_json(nlohmann::json::parse(j.dump(2)));
  EXPECT_EQ(back, b);
  EXPECT_EQ(to_json(back).dump(), j.dump());
}

TEST(Report, RejectsWrongSchema) {
  nlohmann::json j = to_json(sample_bundle());
  j["schema"] = "something/9";
  EXPECT_THROW(bundle_from_json(j), std::invalid_argument);
}

TEST(Report, FailuresListed) {
  const ReportBundle b = sample_bundle();
  EXPECT_FALSE(b.all_passed());
  ASSERT_EQ(b.failures().size(), 1u);
  EXPECT_NE(b.failures()[0].find("something else"), std::string::npos);
  EXPECT_NE(b.find_value("nonergodic"), nullptr);
  EXPECT_EQ(b.find_value("absent"), nullptr);
}

TEST(Report, CsvDirWithoutSweeps) {
  const fs::path dir = fresh_dir("nosweeps");
  emit_report(sample_bundle(), "csv-dir", dir.string());
  EXPECT_TRUE(fs::exists(dir / "values.csv"));
  EXPECT_TRUE(fs::exists(dir / "duals.csv"));
  EXPECT_TRUE(fs::exists(dir / "checks.csv"));
  EXPECT_TRUE(fs::exists(dir / "measures"));
  EXPECT_FALSE(fs::exists(dir / "sweeps"));
  EXPECT_FALSE(fs::exists(dir / "trajectories"));
  EXPECT_EQ(count_lines(dir / "values.csv"), 2);
  std::ifstream in(dir / "values.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_NE(row.find("\"comma, and \"\"quotes\"\"\""), std::string::npos) << row;
}

TEST(Report, CsvDirEpsilonSweep) {
  const fs::path dir = fresh_dir("eps");
  ReportBundle b = sample_bundle();
  b.sweeps.push_back(epsilon_table());
  emit_report(b, "csv-dir", dir.string());
  ASSERT_TRUE(fs::exists(dir / "sweeps" / "epsilon.csv"));
  EXPECT_EQ(count_lines(dir / "sweeps" / "epsilon.csv"), 1 + 3);
  std::ifstream in(dir / "sweeps" / "epsilon.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_NE(header.find("monotone_step"), std::string::npos);
  ASSERT_TRUE(fs::exists(dir / "sweeps" / "epsilon.dat"));
  EXPECT_EQ(count_lines(dir / "sweeps" / "epsilon.dat"), 1 + 3);
}

TEST(Report, JsonFileAndBadFormat) {
  const fs::path dir = fresh_dir("json");
  const ReportBundle b = sample_bundle();
  emit_report(b, "json", dir.string());
  std::ifstream in(dir / "report.json");
  EXPECT_EQ(bundle_from_json(nlohmann::json::parse(in)), b);
  EXPECT_THROW(emit_report(b, "xml", dir.string()), std::invalid_argument);
}

TEST(Report, UnwritablePath) {
  const fs::path file = fresh_dir("blocker");
  std::ofstream(file.string()) << "x";
  EXPECT_THROW(emit_report(sample_bundle(), "json", (file / "sub").string()), std::runtime_error);
  fs::remove(file);
}
