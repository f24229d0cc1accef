#include "doctest.h"

#include "helpers.hpp"
#include "uq/config.hpp"
#include "uq/report.hpp"

using namespace uq;
using nlohmann::json;
using uq::testing::canonical_oracle;

namespace {

// A tiny but complete suite for report-level tests.
harness::Suite mini_suite() {
  harness::Suite suite;
  suite.name = "report-mini";
  suite.seed = 21;
  suite.generators["task"] = synth::canonical_task();
  datasel::DataSpec full;
  full.kind = datasel::DataSpecKind::FullOdd;
  full.generator = "task";
  full.n = 128;
  suite.data_specs["id_full"] = full;

  criteria::AcceptanceCriterion crit;
  crit.id = "cal";
  crit.category = criteria::RequirementCategory::Calibration;
  crit.data_spec = "id_full";
  crit.measure.id = metrics::MetricId::EceRegression;
  crit.threshold = 0.15;
  crit.test_depth = {criteria::TestLevel::Global};
  suite.criteria.push_back(crit);
  suite.estimator = canonical_oracle();
  return suite;
}

json demo_config() {
  return json::parse(R"({"suite": "report-mini", "seed": 21, "jobs": 4,
                         "generators": {}, "criteria": []})");
}

}  // namespace

TEST_CASE("report carries results, criteria and a rederivable overall verdict") {
  const auto suite = mini_suite();
  const auto outcome = harness::run_suite(suite);
  const auto report = report::build(demo_config(), suite, outcome);
  CHECK(report.at("schema_version") == report::kSchemaVersion);
  CHECK(report.at("suite") == "report-mini");
  CHECK(report.at("overall") == "pass");
  CHECK(report.at("results").size() == outcome.results.size());
  CHECK(report::integrity_issues(report).empty());
}

TEST_CASE("strip_timing removes every wall-clock field") {
  const auto suite = mini_suite();
  const auto outcome = harness::run_suite(suite);
  const auto stripped = report::strip_timing(report::build(demo_config(), suite, outcome));
  for (const auto& r : stripped.at("results")) {
    CHECK(!r.contains("runtime_s"));
    CHECK(!r.contains("timing"));
  }
  // Two in-process runs agree byte-for-byte once timing is stripped.
  const auto outcome2 = harness::run_suite(suite);
  const auto stripped2 =
      report::strip_timing(report::build(demo_config(), suite, outcome2));
  CHECK(stripped.dump() == stripped2.dump());
}

TEST_CASE("tampered verdicts are flagged by the integrity check") {
  const auto suite = mini_suite();
  const auto outcome = harness::run_suite(suite);
  auto report_doc = report::build(demo_config(), suite, outcome);
  report_doc["overall"] = "fail";
  const auto issues = report::integrity_issues(report_doc);
  REQUIRE(!issues.empty());

  auto flipped = report::build(demo_config(), suite, outcome);
  for (auto& c : flipped["criteria"]) {
    if (c["id"] == "cal") c["verdict"] = "fail";
  }
  CHECK(!report::integrity_issues(flipped).empty());
}

TEST_CASE("markdown render contains one row per test and flags tampering") {
  const auto suite = mini_suite();
  const auto outcome = harness::run_suite(suite);
  auto report_doc = report::build(demo_config(), suite, outcome);
  const auto md = report::render_markdown(report_doc);
  for (const auto& r : outcome.results) {
    CHECK(md.find(r.test_id) != std::string::npos);
  }
  CHECK(md.find("Conflicting results") != std::string::npos);
  CHECK(md.find("WARNING") == std::string::npos);

  report_doc["overall"] = "fail";
  const auto tampered_md = report::render_markdown(report_doc);
  CHECK(tampered_md.find("WARNING") != std::string::npos);
}

TEST_CASE("config digest normalizes parallelism and key order") {
  const auto a = json::parse(R"({"suite": "s", "seed": 1, "jobs": 2, "b": 1, "a": 2})");
  const auto b = json::parse(R"({"a": 2, "b": 1, "jobs": 64, "seed": 1, "suite": "s"})");
  CHECK(config::config_digest(a) == config::config_digest(b));
  auto c = a;
  c["seed"] = 2;
  CHECK(config::config_digest(a) != config::config_digest(c));
}
