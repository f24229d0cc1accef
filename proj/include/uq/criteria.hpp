#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "uq/metrics.hpp"

namespace uq::criteria {

// The ten requirement categories. Closed set; everything a requirement can
// ask of an uncertainty estimator falls into exactly one of them.
enum class RequirementCategory {
  Calibration,
  LocalCalibration,
  DownstreamTasks,
  ArgumentativelySubstantiated,
  UncertaintyAttribution,
  LargeNetworkApplicability,
  MinimalOverhead,
  MinimalTradeoffs,
  TechnicalSimplicity,
  ApplicationSpecific,
};

std::string to_string(RequirementCategory c);
RequirementCategory category_from_string(const std::string& s);

// Categories that cannot be scored numerically; they are only accepted with
// a manual measure and show up in reports as asserted-by-config.
bool is_qualitative(RequirementCategory c);

enum class Comparator { Le, Ge };
std::string to_string(Comparator c);
Comparator comparator_from_string(const std::string& s);

enum class TestLevel { Technical, Global, SubsetPointwise, Complementary };
std::string to_string(TestLevel l);
TestLevel level_from_string(const std::string& s);
// Hierarchy order: Technical first.
int level_rank(TestLevel l);

// The (data specification, measure, threshold) 3-tuple, plus the category
// it serves and the hierarchy depth it is to be tested at.
struct AcceptanceCriterion {
  std::string id;
  RequirementCategory category = RequirementCategory::Calibration;
  std::string data_spec;  // name of a DataSpec in the suite config
  metrics::MetricKind measure;
  Comparator comparator = Comparator::Le;
  double threshold = 0.0;
  std::vector<TestLevel> test_depth;
  std::string note;

  bool manual() const { return measure.id == metrics::MetricId::Manual; }
  void validate() const;
};

// Parses and validates the `criteria` array: unique ids, known measures,
// qualitative categories restricted to manual measures. Errors carry the
// offending array index and field.
std::vector<AcceptanceCriterion> parse_criteria(const nlohmann::json& doc);
nlohmann::json to_json(const AcceptanceCriterion& c);
nlohmann::json to_json(const std::vector<AcceptanceCriterion>& cs);

enum class PassFail { Pass, Fail, Error };
std::string to_string(PassFail v);

// Binary decision, inclusive at the threshold. NaN measurements yield the
// distinct error verdict, never a silent pass or fail.
PassFail evaluate(const AcceptanceCriterion& c, double measured);
PassFail evaluate(Comparator cmp, double threshold, double measured);

}  // namespace uq::criteria
