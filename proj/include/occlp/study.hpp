#pragma once

#include <string>

#include "occlp/config.hpp"
#include "occlp/report.hpp"

namespace occlp {

enum class StudyKind { Solve, Simulate, Sweep, Convergence, Certify, Oracle };

const char* to_string(StudyKind kind);
StudyKind parse_study_kind(const std::string& name);

// Deterministic for a given config: results are ordered by job index, not completion.
// jobs <= 0 uses the machine's parallelism.
ReportBundle run_study(const StudyConfig& config, StudyKind kind, int jobs = 0);

// Rebuilds the LP instances of the study's [program] block and writes them as text.
void export_lp_instances(const StudyConfig& config, const std::string& dir);

}  // namespace occlp
