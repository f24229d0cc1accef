#include "uq/report.hpp"

#include <fstream>
#include <sstream>

#include "uq/config.hpp"
#include "uq/errors.hpp"

namespace uq::report {

using json = nlohmann::json;

namespace {

json result_to_json(const harness::TestResult& r) {
  json out;
  out["id"] = r.test_id;
  out["level"] = criteria::to_string(r.level);
  out["criterion"] = r.criterion_id;
  out["verdict"] = harness::to_string(r.verdict);
  out["measured"] = json(r.measured);
  if (!r.timing.empty()) out["timing"] = json(r.timing);
  if (!r.artifacts.empty()) out["artifacts"] = r.artifacts;
  if (!r.message.empty()) out["message"] = r.message;
  out["runtime_s"] = r.runtime_s;
  return out;
}

json violation_to_json(const odd::Violation& v) {
  json out;
  switch (v.kind) {
    case odd::Violation::Kind::InDomainPointNotIn: out["kind"] = "in_domain_point_not_in"; break;
    case odd::Violation::Kind::OutOfDomainPointInside: out["kind"] = "out_of_domain_point_inside"; break;
    case odd::Violation::Kind::BorderlinePointNotBorderline:
      out["kind"] = "borderline_point_not_borderline";
      break;
    case odd::Violation::Kind::PerformanceRangeExceedsUncertaintyRange:
      out["kind"] = "performance_range_exceeds_uncertainty_range";
      break;
  }
  if (!v.dimension.empty()) out["dimension"] = v.dimension;
  if (v.point_index) out["point_index"] = *v.point_index;
  out["message"] = v.message;
  return out;
}

aggregate::LogicNode node_from_annotation(const json& a) {
  if (a.contains("leaf")) {
    return aggregate::LogicNode::leaf(a["leaf"].get<std::string>());
  }
  std::vector<aggregate::LogicNode> kids;
  for (const auto& c : a.at("children")) kids.push_back(node_from_annotation(c));
  const auto op = a.at("op").get<std::string>();
  if (op == "and") return aggregate::LogicNode::make_and(std::move(kids));
  if (op == "or") return aggregate::LogicNode::make_or(std::move(kids));
  if (op == "k_of_n") {
    return aggregate::LogicNode::k_of_n(a.at("k").get<int>(), std::move(kids));
  }
  if (op == "weighted") {
    return aggregate::LogicNode::weighted(a.at("weights").get<std::vector<double>>(),
                                          a.at("tau").get<double>(), std::move(kids));
  }
  throw StructuralError("unknown tree annotation op: " + op);
}

std::map<std::string, aggregate::Verdict> leaf_verdicts_of(const json& report) {
  std::map<std::string, aggregate::Verdict> leaves;
  for (const auto& r : report.at("results")) {
    const auto v = r.at("verdict").get<std::string>();
    aggregate::Verdict tv = aggregate::Verdict::Inconclusive;
    if (v == "pass") tv = aggregate::Verdict::Pass;
    else if (v == "fail") tv = aggregate::Verdict::Fail;
    leaves[r.at("id").get<std::string>()] = tv;
  }
  return leaves;
}

}  // namespace

json build(const json& config_doc, const harness::Suite& suite,
           const harness::SuiteOutcome& outcome) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["suite"] = suite.name;
  doc["seed"] = suite.seed;
  doc["config_digest"] = config::config_digest(config_doc);
  doc["policy"] = suite.policy == aggregate::OverallPolicy::Strict ? "strict" : "tree";
  if (suite.root_tree) doc["root_tree"] = aggregate::tree_to_json(*suite.root_tree);
#if defined(__VERSION__)
  doc["environment"] = std::string("uqsuite schema ") +
                       std::to_string(kSchemaVersion) + ", compiler " + __VERSION__;
#else
  doc["environment"] = std::string("uqsuite schema ") + std::to_string(kSchemaVersion);
#endif

  doc["overall"] = aggregate::to_string(outcome.overall);
  doc["overall_inconclusive"] = outcome.overall == aggregate::Verdict::Inconclusive;

  doc["criteria_config"] = criteria::to_json(suite.criteria);

  json crits = json::array();
  for (const auto& co : outcome.criterion_outcomes) {
    json c;
    c["id"] = co.criterion_id;
    c["verdict"] = aggregate::to_string(co.verdict);
    c["asserted_by_config"] = co.asserted_by_config;
    if (!co.tree_annotation.is_null()) c["tree"] = co.tree_annotation;
    crits.push_back(std::move(c));
  }
  doc["criteria"] = crits;

  json results = json::array();
  for (const auto& r : outcome.results) results.push_back(result_to_json(r));
  doc["results"] = results;

  doc["conflicting_criteria"] = outcome.conflicting_criteria;

  json violations = json::array();
  for (const auto& v : outcome.odd_violations) violations.push_back(violation_to_json(v));
  doc["odd_violations"] = violations;
  return doc;
}

json strip_timing(json doc) {
  if (doc.is_object()) {
    doc.erase("runtime_s");
    doc.erase("timing");
    for (auto& [key, value] : doc.items()) value = strip_timing(value);
  } else if (doc.is_array()) {
    for (auto& value : doc) value = strip_timing(value);
  }
  return doc;
}

std::vector<std::string> integrity_issues(const json& report) {
  std::vector<std::string> issues;
  try {
    const auto leaves = leaf_verdicts_of(report);
    std::map<std::string, aggregate::Verdict> recomputed;
    for (const auto& c : report.at("criteria")) {
      const auto id = c.at("id").get<std::string>();
      const auto stored =
          aggregate::verdict_from_string(c.at("verdict").get<std::string>());
      if (c.value("asserted_by_config", false)) {
        recomputed[id] = stored;
        continue;
      }
      if (!c.contains("tree")) {
        issues.push_back("criterion '" + id + "' lacks a tree annotation");
        recomputed[id] = stored;
        continue;
      }
      const auto tree = node_from_annotation(c["tree"]);
      const auto v = aggregate::evaluate_tree(tree, leaves);
      recomputed[id] = v;
      if (v != stored) {
        issues.push_back("criterion '" + id + "' verdict " +
                         aggregate::to_string(stored) +
                         " disagrees with recomputation " + aggregate::to_string(v));
      }
    }
    const auto stored_overall =
        aggregate::verdict_from_string(report.at("overall").get<std::string>());
    aggregate::Verdict expect;
    if (report.value("policy", std::string("strict")) == "tree" &&
        report.contains("root_tree")) {
      const auto root = aggregate::tree_from_json(report["root_tree"]);
      expect = aggregate::overall(recomputed, aggregate::OverallPolicy::Tree, &root);
    } else {
      expect = aggregate::overall(recomputed, aggregate::OverallPolicy::Strict);
    }
    if (expect != stored_overall) {
      issues.push_back("overall verdict " + aggregate::to_string(stored_overall) +
                       " disagrees with recomputation " + aggregate::to_string(expect));
    }
  } catch (const std::exception& e) {
    issues.push_back(std::string("integrity check failed: ") + e.what());
  }
  return issues;
}

std::string render_markdown(const json& report) {
  std::ostringstream md;
  md << "# Uncertainty test report: " << report.value("suite", std::string("?"))
     << "\n\n";
  md << "- overall: **" << report.value("overall", std::string("?")) << "**\n";
  md << "- seed: " << report.value("seed", 0) << "\n";
  md << "- config digest: `" << report.value("config_digest", std::string()) << "`\n\n";

  const auto issues = integrity_issues(report);
  if (!issues.empty()) {
    md << "## Integrity warnings\n\n";
    for (const auto& issue : issues) md << "- WARNING: " << issue << "\n";
    md << "\n";
  }

  md << "## Criteria\n\n";
  md << "| criterion | verdict | asserted by config |\n";
  md << "|---|---|---|\n";
  for (const auto& c : report.at("criteria")) {
    md << "| " << c.at("id").get<std::string>() << " | "
       << c.at("verdict").get<std::string>() << " | "
       << (c.value("asserted_by_config", false) ? "yes" : "no") << " |\n";
  }
  md << "\n## Test results\n\n";
  md << "| test | level | criterion | verdict | value | note |\n";
  md << "|---|---|---|---|---|---|\n";
  for (const auto& r : report.at("results")) {
    std::string value = "-";
    if (r.contains("measured")) {
      for (const auto key : {"value", "worst_score", "disparity", "max_rate"}) {
        if (r["measured"].contains(key)) {
          std::ostringstream v;
          v << r["measured"][key].get<double>();
          value = v.str();
          break;
        }
      }
    }
    md << "| " << r.at("id").get<std::string>() << " | "
       << r.at("level").get<std::string>() << " | "
       << r.at("criterion").get<std::string>() << " | "
       << r.at("verdict").get<std::string>() << " | " << value << " | "
       << r.value("message", std::string()) << " |\n";
  }

  const auto& conflicting = report.at("conflicting_criteria");
  md << "\n## Conflicting results\n\n";
  if (conflicting.empty()) {
    md << "No criterion ended with mixed pass/fail case verdicts.\n";
  } else {
    md << "Criteria with mixed case verdicts; inspect their test setups:\n\n";
    for (const auto& id : conflicting) {
      md << "- " << id.get<std::string>() << "\n";
    }
  }

  if (report.contains("odd_violations") && !report["odd_violations"].empty()) {
    md << "\n## ODD consistency\n\n";
    for (const auto& v : report["odd_violations"]) {
      md << "- " << v.at("message").get<std::string>() << "\n";
    }
  }
  md << "\n";
  return md.str();
}

void write_json(const json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << doc.dump(2) << "\n";
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid json in ") + path + ": " + e.what());
  }
}

}  // namespace uq::report
