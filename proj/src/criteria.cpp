#include "uq/criteria.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "uq/errors.hpp"

namespace uq::criteria {

using json = nlohmann::json;

std::string to_string(RequirementCategory c) {
  switch (c) {
    case RequirementCategory::Calibration: return "calibration";
    case RequirementCategory::LocalCalibration: return "local_calibration";
    case RequirementCategory::DownstreamTasks: return "downstream_tasks";
    case RequirementCategory::ArgumentativelySubstantiated:
      return "argumentatively_substantiated";
    case RequirementCategory::UncertaintyAttribution:
      return "uncertainty_attribution";
    case RequirementCategory::LargeNetworkApplicability:
      return "large_network_applicability";
    case RequirementCategory::MinimalOverhead: return "minimal_overhead";
    case RequirementCategory::MinimalTradeoffs: return "minimal_tradeoffs";
    case RequirementCategory::TechnicalSimplicity: return "technical_simplicity";
    case RequirementCategory::ApplicationSpecific: return "application_specific";
  }
  return "application_specific";
}

RequirementCategory category_from_string(const std::string& s) {
  if (s == "calibration") return RequirementCategory::Calibration;
  if (s == "local_calibration") return RequirementCategory::LocalCalibration;
  if (s == "downstream_tasks") return RequirementCategory::DownstreamTasks;
  if (s == "argumentatively_substantiated")
    return RequirementCategory::ArgumentativelySubstantiated;
  if (s == "uncertainty_attribution")
    return RequirementCategory::UncertaintyAttribution;
  if (s == "large_network_applicability")
    return RequirementCategory::LargeNetworkApplicability;
  if (s == "minimal_overhead") return RequirementCategory::MinimalOverhead;
  if (s == "minimal_tradeoffs") return RequirementCategory::MinimalTradeoffs;
  if (s == "technical_simplicity") return RequirementCategory::TechnicalSimplicity;
  if (s == "application_specific") return RequirementCategory::ApplicationSpecific;
  throw ConfigError("unknown requirement category: " + s);
}

bool is_qualitative(RequirementCategory c) {
  return c == RequirementCategory::ArgumentativelySubstantiated ||
         c == RequirementCategory::TechnicalSimplicity;
}

std::string to_string(Comparator c) { return c == Comparator::Le ? "le" : "ge"; }

Comparator comparator_from_string(const std::string& s) {
  if (s == "le" || s == "<=") return Comparator::Le;
  if (s == "ge" || s == ">=") return Comparator::Ge;
  throw ConfigError("unknown comparator: " + s);
}

std::string to_string(TestLevel l) {
  switch (l) {
    case TestLevel::Technical: return "technical";
    case TestLevel::Global: return "global";
    case TestLevel::SubsetPointwise: return "subset_pointwise";
    case TestLevel::Complementary: return "complementary";
  }
  return "technical";
}

TestLevel level_from_string(const std::string& s) {
  if (s == "technical") return TestLevel::Technical;
  if (s == "global") return TestLevel::Global;
  if (s == "subset_pointwise") return TestLevel::SubsetPointwise;
  if (s == "complementary") return TestLevel::Complementary;
  throw ConfigError("unknown test level: " + s);
}

int level_rank(TestLevel l) { return static_cast<int>(l); }

namespace {

// Attainable value range of a measure; used to reject comparator/threshold
// combinations no measurement could ever satisfy.
std::pair<double, double> measure_range(const metrics::MetricKind& m) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (m.id) {
    case metrics::MetricId::EceRegression:
    case metrics::MetricId::EceClassification:
      return {0.0, 1.0};
    case metrics::MetricId::Rmse:
    case metrics::MetricId::LocalWasserstein:
    case metrics::MetricId::WidthStats:
      return {0.0, inf};
    case metrics::MetricId::Etl:
    case metrics::MetricId::Quantile:
      return m.score == metrics::ScoreKind::AbsNormalizedResidual
                 ? std::pair<double, double>{0.0, inf}
                 : std::pair<double, double>{-inf, inf};
    default:
      return {-inf, inf};
  }
}

}  // namespace

void AcceptanceCriterion::validate() const {
  if (id.empty()) throw ConfigError("criterion needs an id");
  measure.validate();
  if (!std::isfinite(threshold)) {
    throw ConfigError("criterion '" + id + "': threshold must be finite");
  }
  if (!manual()) {
    const auto [lo, hi] = measure_range(measure);
    if ((comparator == Comparator::Le && threshold < lo) ||
        (comparator == Comparator::Ge && threshold > hi)) {
      throw ConfigError("criterion '" + id +
                        "': comparator/threshold combination is unsatisfiable "
                        "for measure " + measure.describe());
    }
  }
  if (is_qualitative(category) && !manual()) {
    throw ConfigError("criterion '" + id + "': qualitative category '" +
                      to_string(category) + "' requires measure \"manual\"");
  }
  if (!manual() && test_depth.empty()) {
    throw ConfigError("criterion '" + id + "': test_depth must not be empty");
  }
  if (!manual() && data_spec.empty()) {
    throw ConfigError("criterion '" + id + "': data_spec must be set");
  }
}

namespace {

metrics::MetricKind metric_from_json(const json& m, const std::string& where) {
  metrics::MetricKind kind;
  if (!m.is_object() || !m.contains("kind")) {
    throw ConfigError(where + ": measure must be an object with a 'kind'");
  }
  try {
    kind.id = metrics::metric_id_from_string(m.at("kind").get<std::string>());
    if (m.contains("levels")) kind.levels = m["levels"].get<int>();
    if (m.contains("bins")) kind.bins = m["bins"].get<int>();
    if (m.contains("alpha")) kind.alpha = m["alpha"].get<double>();
    if (m.contains("q")) kind.q = m["q"].get<double>();
    if (m.contains("score")) {
      kind.score = metrics::score_from_string(m["score"].get<std::string>());
    }
    if (m.contains("stat")) kind.width_stat = m["stat"].get<std::string>();
    kind.validate();
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return kind;
}

json metric_to_json(const metrics::MetricKind& kind) {
  json m;
  m["kind"] = metrics::to_string(kind.id);
  switch (kind.id) {
    case metrics::MetricId::EceRegression: m["levels"] = kind.levels; break;
    case metrics::MetricId::EceClassification: m["bins"] = kind.bins; break;
    case metrics::MetricId::Etl:
      m["alpha"] = kind.alpha;
      m["score"] = metrics::to_string(kind.score);
      break;
    case metrics::MetricId::Quantile:
      m["q"] = kind.q;
      m["score"] = metrics::to_string(kind.score);
      break;
    case metrics::MetricId::WidthStats: m["stat"] = kind.width_stat; break;
    default: break;
  }
  return m;
}

}  // namespace

std::vector<AcceptanceCriterion> parse_criteria(const json& doc) {
  if (!doc.is_array()) throw ConfigError("criteria: expected an array");
  std::vector<AcceptanceCriterion> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string where = "criteria[" + std::to_string(i) + "]";
    const auto& c = doc[i];
    AcceptanceCriterion crit;
    try {
      crit.id = c.at("id").get<std::string>();
      crit.category = category_from_string(c.at("category").get<std::string>());
      crit.measure = metric_from_json(c.at("measure"), where + ".measure");
      if (!crit.manual()) {
        crit.data_spec = c.at("data_spec").get<std::string>();
        crit.comparator =
            comparator_from_string(c.at("comparator").get<std::string>());
        crit.threshold = c.at("threshold").get<double>();
        for (const auto& l : c.at("test_depth")) {
          crit.test_depth.push_back(level_from_string(l.get<std::string>()));
        }
      }
      if (c.contains("note")) crit.note = c["note"].get<std::string>();
    } catch (const json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
    try {
      crit.validate();
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
    if (!seen.insert(crit.id).second) {
      throw ConfigError(where + ": duplicate criterion id '" + crit.id + "'");
    }
    out.push_back(std::move(crit));
  }
  return out;
}

json to_json(const AcceptanceCriterion& c) {
  json out;
  out["id"] = c.id;
  out["category"] = to_string(c.category);
  out["measure"] = metric_to_json(c.measure);
  if (!c.manual()) {
    out["data_spec"] = c.data_spec;
    out["comparator"] = to_string(c.comparator);
    out["threshold"] = c.threshold;
    json depth = json::array();
    for (auto l : c.test_depth) depth.push_back(to_string(l));
    out["test_depth"] = depth;
  }
  if (!c.note.empty()) out["note"] = c.note;
  return out;
}

json to_json(const std::vector<AcceptanceCriterion>& cs) {
  json out = json::array();
  for (const auto& c : cs) out.push_back(to_json(c));
  return out;
}

std::string to_string(PassFail v) {
  switch (v) {
    case PassFail::Pass: return "pass";
    case PassFail::Fail: return "fail";
    case PassFail::Error: return "error";
  }
  return "error";
}

PassFail evaluate(Comparator cmp, double threshold, double measured) {
  if (std::isnan(measured)) return PassFail::Error;
  if (cmp == Comparator::Le) {
    return measured <= threshold ? PassFail::Pass : PassFail::Fail;
  }
  return measured >= threshold ? PassFail::Pass : PassFail::Fail;
}

PassFail evaluate(const AcceptanceCriterion& c, double measured) {
  return evaluate(c.comparator, c.threshold, measured);
}

}  // namespace uq::criteria
