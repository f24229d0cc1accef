#pragma once

#include <string>

#include "json.hpp"
#include "uq/harness.hpp"

namespace uq::report {

inline constexpr int kSchemaVersion = 1;

// Assembles the run report: schema version, suite id, seed, config digest,
// every test result, per-criterion verdicts with tree annotations, the
// overall verdict and the conflicting-results section. The overall verdict
// is always re-derivable from the embedded results and trees.
nlohmann::json build(const nlohmann::json& config_doc,
                     const harness::Suite& suite,
                     const harness::SuiteOutcome& outcome);

// Removes wall-clock fields (runtime_s and timing maps) recursively, so two
// runs of the same config+seed compare byte-identical.
nlohmann::json strip_timing(nlohmann::json doc);

// Re-derives per-criterion and overall verdicts from the embedded results
// and tree annotations; returns mismatches (empty = report is internally
// consistent).
std::vector<std::string> integrity_issues(const nlohmann::json& report);

// Human-readable summary: per-criterion tables, per-test rows, conflicting
// results, and an integrity warning when the stored verdicts disagree with
// recomputation.
std::string render_markdown(const nlohmann::json& report);

void write_json(const nlohmann::json& doc, const std::string& path);
nlohmann::json read_json(const std::string& path);

}  // namespace uq::report
