#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uq/aggregate.hpp"
#include "uq/criteria.hpp"
#include "uq/datasel.hpp"
#include "uq/estimators.hpp"
#include "uq/odd.hpp"

namespace uq::harness {

using criteria::TestLevel;

enum class Verdict { Pass, Fail, Error, Skipped };
std::string to_string(Verdict v);
aggregate::Verdict to_tree_verdict(Verdict v);

// Reserved criterion id for the auto-generated level-1 tests.
inline const std::string kTechnicalCriterion = "technical";

struct LatencyBounds {
  int repetitions = 3;
  double p50_ms = 50.0;
  double p99_ms = 250.0;
  double max_overhead = 1000.0;  // est time / bare model time
};

struct TechnicalParams {
  std::string data_spec;  // dataset the technical probes run on
  LatencyBounds latency;
  std::string id_prefix = "technical";
};

enum class Designated { Metric, TradeoffRatio };

// One executable test instance. criterion_id is "technical" for level-1
// cases; ids are unique per suite and key the per-case RNG.
struct TestCase {
  std::string id;
  TestLevel level = TestLevel::Global;
  std::string criterion_id;
  std::string data_spec;  // name in the suite's data_specs registry
  metrics::MetricKind measure;
  criteria::Comparator comparator = criteria::Comparator::Le;
  double threshold = 0.0;
  std::uint64_t seed = 0;  // assigned by run_suite: derive(suite seed, id)

  // Global-level options.
  std::vector<std::pair<datasel::CorruptionKind, double>> shifted;
  Designated designated = Designated::Metric;
  bool temporal = false;  // verdict on max |d sigma| / |d x| along the path

  // Complementary-level options.
  std::size_t min_group_size = 30;
};

struct TestResult {
  std::string test_id;
  TestLevel level = TestLevel::Global;
  std::string criterion_id;
  Verdict verdict = Verdict::Error;
  std::map<std::string, double> measured;  // deterministic values
  std::map<std::string, double> timing;    // wall-clock values, stripped from
                                           // determinism comparisons
  std::vector<std::string> artifacts;      // e.g. worst inputs found
  std::string message;
  double runtime_s = 0.0;
};

// Shared lookup state for case execution.
struct RunContext {
  const std::map<std::string, synth::Generator>* generators = nullptr;
  const std::map<std::string, datasel::DataSpec>* data_specs = nullptr;
  std::uint64_t suite_seed = 0;
  // Bare task model for overhead and trade-off comparisons; optional.
  std::shared_ptr<const nn::Mlp> baseline;

  const datasel::DataSpec& spec(const std::string& name) const;
  datasel::SelectionContext selection(std::uint64_t seed,
                                      const Dataset* base = nullptr) const;
};

// Level 1: output validity, invalid-input handling, determinism, latency.
// Generated for every estimator regardless of criteria.
std::vector<TestResult> run_technical(const Estimator& est, const Dataset& data,
                                      const TechnicalParams& params,
                                      std::uint64_t seed,
                                      const RunContext& ctx);

// Level 2: dataset-wide metric on ID data and configured shifts, plus the
// performance trade-off against the bare model.
TestResult run_global(const Estimator& est, const TestCase& kase,
                      const RunContext& ctx);

// Level 2, temporal: max |delta sigma_total| / |delta x| along the row path
// (rows ordered by feature vector) against the configured bound.
TestResult run_temporal(const Estimator& est, const TestCase& kase,
                        const RunContext& ctx);

// Level 3: quantile/semantic slices, sweeps (all cells must pass, per-cell
// curve attached), curated sets, and search-backed cases (verdict on the
// worst found point-wise score).
TestResult run_subset(const Estimator& est, const TestCase& kase,
                      const RunContext& ctx);

// Level 4: per-group metric disparity over sensitive group labels.
TestResult run_complementary(const Estimator& est, const TestCase& kase,
                             const RunContext& ctx);

// A whole configured suite.
struct Suite {
  std::string name = "suite";
  std::uint64_t seed = 0;
  bool fail_fast = false;
  int jobs = 1;

  std::map<std::string, synth::Generator> generators;
  std::map<std::string, datasel::DataSpec> data_specs;
  std::vector<criteria::AcceptanceCriterion> criteria;
  std::vector<TestCase> cases;  // explicit cases; defaults are derived

  EstimatorPtr estimator;
  std::shared_ptr<const nn::Mlp> baseline;

  std::optional<odd::OddSpec> odd;

  std::map<std::string, aggregate::LogicNode> criterion_trees;
  aggregate::OverallPolicy policy = aggregate::OverallPolicy::Strict;
  std::optional<aggregate::LogicNode> root_tree;

  TechnicalParams technical;

  // Expands criteria without explicit cases into default ones and checks
  // id uniqueness and reference integrity. Called by run_suite.
  std::vector<TestCase> materialize_cases() const;
};

struct CriterionOutcome {
  std::string criterion_id;
  aggregate::Verdict verdict = aggregate::Verdict::Inconclusive;
  bool asserted_by_config = false;  // manual criteria
  nlohmann::json tree_annotation;
};

struct SuiteOutcome {
  std::vector<TestResult> results;  // sorted by test id
  std::vector<CriterionOutcome> criterion_outcomes;
  aggregate::Verdict overall = aggregate::Verdict::Inconclusive;
  std::vector<odd::Violation> odd_violations;
  // Criteria whose cases ended with mixed pass/fail verdicts; the report's
  // conflicting-results section.
  std::vector<std::string> conflicting_criteria;
};

// Executes levels in hierarchy order. With fail_fast, a failing or erroring
// technical test skips every deeper case (marked Skipped, never dropped).
// Case RNG is keyed by (suite seed, test id): order- and thread-count-
// independent. Results are merged sorted by id and aggregated through the
// logic trees.
SuiteOutcome run_suite(const Suite& suite);

}  // namespace uq::harness
