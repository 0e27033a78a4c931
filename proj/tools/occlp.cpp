// occlp: batch front end. One config file drives one study; see docs/config.md.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "occlp/config.hpp"
#include "occlp/log.hpp"
#include "occlp/report.hpp"
#include "occlp/study.hpp"

namespace {

// Exit codes: 0 all checks passed, 1 some check failed, 2 bad usage or config, 3 runtime error.
constexpr int kChecksFailed = 1;
constexpr int kBadConfig = 2;
constexpr int kRuntimeError = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"occlp: occupational-measure LPs for long-run average optimal control"};
  app.set_version_flag("--version", std::string(occlp::kToolVersion));

  std::string study;
  std::string config_path;
  std::string out_dir;
  int jobs = 0;
  bool print_defaults = false;

  app.add_option("study", study, "solve | simulate | sweep | convergence | certify | oracle")
      ->check(CLI::IsMember({"solve", "simulate", "sweep", "convergence", "certify", "oracle"}));
  app.add_option("--config", config_path, "study config file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides [output] path)");
  app.add_option("--jobs", jobs, "worker threads (default: machine parallelism)")->check(CLI::NonNegativeNumber);
  app.add_flag("--print-defaults", print_defaults, "print every config key with its default and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kBadConfig;
  }

  if (print_defaults) {
    std::cout << occlp::default_config_text();
    return 0;
  }
  if (study.empty() || config_path.empty()) {
    std::cerr << "occlp: a study and --config FILE are required (see --help)\n";
    return kBadConfig;
  }

  occlp::StudyConfig config;
  try {
    config = occlp::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "occlp: " << e.what() << "\n";
    return kBadConfig;
  }
  if (!out_dir.empty()) config.output.path = out_dir;

  occlp::ReportBundle bundle;
  try {
    const auto kind = occlp::parse_study_kind(study);
    bundle = occlp::run_study(config, kind, jobs);
    occlp::emit_report(bundle, config.output.format, config.output.path);
    if (config.program.export_lp) occlp::export_lp_instances(config, config.output.path);
  } catch (const std::exception& e) {
    std::cerr << "occlp: " << e.what() << "\n";
    return kRuntimeError;
  }

  occlp::log_info("report written to " + config.output.path);
  const auto failures = bundle.failures();
  if (!failures.empty()) {
    std::cerr << "occlp: " << failures.size() << " of " << bundle.checks.size() << " checks failed:\n";
    for (const auto& f : failures) std::cerr << "  " << f << "\n";
    return kChecksFailed;
  }
  std::fprintf(stdout, "%s: %zu checks passed, report in %s\n", study.c_str(), bundle.checks.size(),
               config.output.path.c_str());
  return 0;
}
