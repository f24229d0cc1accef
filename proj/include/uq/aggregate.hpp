#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

namespace uq::aggregate {

// Three-valued verdict. Inconclusive propagates wherever an errored or
// skipped test would be needed to decide; it is never coerced to pass.
enum class Verdict { Fail = 0, Inconclusive = 1, Pass = 2 };

std::string to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);

// Aggregation structure over binary test results. Leaves name test ids (or
// criterion ids in a root tree); composites follow Kleene semantics.
struct LogicNode {
  enum class Kind { Leaf, And, Or, KofN, Weighted };
  Kind kind = Kind::Leaf;
  std::string leaf_id;
  int k = 1;                      // KofN
  double tau = 1.0;               // Weighted pass threshold
  std::vector<double> weights;    // Weighted, aligned with children
  std::vector<LogicNode> children;

  void validate() const;
  // All leaf ids in this subtree, in order.
  std::vector<std::string> leaf_ids() const;

  static LogicNode leaf(std::string id);
  static LogicNode make_and(std::vector<LogicNode> children);
  static LogicNode make_or(std::vector<LogicNode> children);
  static LogicNode k_of_n(int k, std::vector<LogicNode> children);
  static LogicNode weighted(std::vector<double> weights, double tau,
                            std::vector<LogicNode> children);
};

// Kleene evaluation: And = min, Or = max over fail < inconclusive < pass;
// KofN passes with >= k passing children, fails once more than n-k fail;
// Weighted passes when passing weight / total weight >= tau and fails when
// even counting every inconclusive child as passing stays below tau.
// Dangling leaf ids -> StructuralError before any evaluation.
Verdict evaluate_tree(const LogicNode& tree,
                      const std::map<std::string, Verdict>& leaf_verdicts);

// Same evaluation, returning the tree mirrored as JSON with a per-node
// verdict annotation for the report.
nlohmann::json evaluate_tree_annotated(
    const LogicNode& tree, const std::map<std::string, Verdict>& leaf_verdicts,
    Verdict* out_verdict = nullptr);

enum class OverallPolicy { Strict, Tree };

// strict: And over all criterion verdicts. tree: evaluate a custom root
// tree whose leaves are criterion ids (every criterion must appear).
Verdict overall(const std::map<std::string, Verdict>& criterion_verdicts,
                OverallPolicy policy, const LogicNode* root_tree = nullptr);

// (De)serialization of trees as nested JSON:
//   "leaf-id" | {"and":[...]} | {"or":[...]} | {"k_of_n":{"k":2,"children":[...]}}
//   | {"weighted":{"weights":[...],"tau":0.5,"children":[...]}}
LogicNode tree_from_json(const nlohmann::json& doc);
nlohmann::json tree_to_json(const LogicNode& tree);

}  // namespace uq::aggregate
