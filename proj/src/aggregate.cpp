#include "uq/aggregate.hpp"

#include <algorithm>

#include "uq/errors.hpp"

namespace uq::aggregate {

using json = nlohmann::json;

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "pass") return Verdict::Pass;
  if (s == "fail") return Verdict::Fail;
  if (s == "inconclusive") return Verdict::Inconclusive;
  throw ConfigError("unknown verdict: " + s);
}

void LogicNode::validate() const {
  if (kind == Kind::Leaf) {
    if (leaf_id.empty()) throw StructuralError("leaf node needs a test id");
    return;
  }
  if (children.empty()) throw StructuralError("composite node needs children");
  if (kind == Kind::KofN) {
    if (k < 1 || static_cast<std::size_t>(k) > children.size()) {
      throw StructuralError("k_of_n needs 1 <= k <= |children|");
    }
  }
  if (kind == Kind::Weighted) {
    if (weights.size() != children.size()) {
      throw StructuralError("weighted node needs one weight per child");
    }
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw StructuralError("weights must be >= 0");
      total += w;
    }
    if (!(total > 0.0)) throw StructuralError("weights must sum to > 0");
    if (!(tau >= 0.0 && tau <= 1.0)) throw StructuralError("tau must be in [0,1]");
  }
  for (const auto& c : children) c.validate();
}

std::vector<std::string> LogicNode::leaf_ids() const {
  std::vector<std::string> ids;
  if (kind == Kind::Leaf) {
    ids.push_back(leaf_id);
    return ids;
  }
  for (const auto& c : children) {
    const auto child_ids = c.leaf_ids();
    ids.insert(ids.end(), child_ids.begin(), child_ids.end());
  }
  return ids;
}

LogicNode LogicNode::leaf(std::string id) {
  LogicNode n;
  n.kind = Kind::Leaf;
  n.leaf_id = std::move(id);
  return n;
}

LogicNode LogicNode::make_and(std::vector<LogicNode> children) {
  LogicNode n;
  n.kind = Kind::And;
  n.children = std::move(children);
  return n;
}

LogicNode LogicNode::make_or(std::vector<LogicNode> children) {
  LogicNode n;
  n.kind = Kind::Or;
  n.children = std::move(children);
  return n;
}

LogicNode LogicNode::k_of_n(int k, std::vector<LogicNode> children) {
  LogicNode n;
  n.kind = Kind::KofN;
  n.k = k;
  n.children = std::move(children);
  return n;
}

LogicNode LogicNode::weighted(std::vector<double> weights, double tau,
                              std::vector<LogicNode> children) {
  LogicNode n;
  n.kind = Kind::Weighted;
  n.weights = std::move(weights);
  n.tau = tau;
  n.children = std::move(children);
  return n;
}

namespace {

void check_leaves_resolvable(const LogicNode& tree,
                             const std::map<std::string, Verdict>& leaves) {
  for (const auto& id : tree.leaf_ids()) {
    if (!leaves.count(id)) {
      throw StructuralError("logic tree references unknown id '" + id + "'");
    }
  }
}

Verdict eval(const LogicNode& node,
             const std::map<std::string, Verdict>& leaves) {
  switch (node.kind) {
    case LogicNode::Kind::Leaf:
      return leaves.at(node.leaf_id);
    case LogicNode::Kind::And: {
      Verdict v = Verdict::Pass;
      for (const auto& c : node.children) v = std::min(v, eval(c, leaves));
      return v;
    }
    case LogicNode::Kind::Or: {
      Verdict v = Verdict::Fail;
      for (const auto& c : node.children) v = std::max(v, eval(c, leaves));
      return v;
    }
    case LogicNode::Kind::KofN: {
      int passes = 0;
      int fails = 0;
      for (const auto& c : node.children) {
        const Verdict v = eval(c, leaves);
        passes += v == Verdict::Pass ? 1 : 0;
        fails += v == Verdict::Fail ? 1 : 0;
      }
      const int n = static_cast<int>(node.children.size());
      if (passes >= node.k) return Verdict::Pass;
      if (fails > n - node.k) return Verdict::Fail;
      return Verdict::Inconclusive;
    }
    case LogicNode::Kind::Weighted: {
      double total = 0.0;
      double passing = 0.0;
      double undecided = 0.0;
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        const Verdict v = eval(node.children[i], leaves);
        total += node.weights[i];
        if (v == Verdict::Pass) passing += node.weights[i];
        if (v == Verdict::Inconclusive) undecided += node.weights[i];
      }
      if (passing / total >= node.tau) return Verdict::Pass;
      if ((passing + undecided) / total < node.tau) return Verdict::Fail;
      return Verdict::Inconclusive;
    }
  }
  return Verdict::Inconclusive;
}

json annotate(const LogicNode& node,
              const std::map<std::string, Verdict>& leaves) {
  json out;
  const Verdict v = eval(node, leaves);
  out["verdict"] = to_string(v);
  switch (node.kind) {
    case LogicNode::Kind::Leaf:
      out["leaf"] = node.leaf_id;
      return out;
    case LogicNode::Kind::And: out["op"] = "and"; break;
    case LogicNode::Kind::Or: out["op"] = "or"; break;
    case LogicNode::Kind::KofN:
      out["op"] = "k_of_n";
      out["k"] = node.k;
      break;
    case LogicNode::Kind::Weighted:
      out["op"] = "weighted";
      out["tau"] = node.tau;
      out["weights"] = node.weights;
      break;
  }
  json kids = json::array();
  for (const auto& c : node.children) kids.push_back(annotate(c, leaves));
  out["children"] = kids;
  return out;
}

}  // namespace

Verdict evaluate_tree(const LogicNode& tree,
                      const std::map<std::string, Verdict>& leaf_verdicts) {
  tree.validate();
  check_leaves_resolvable(tree, leaf_verdicts);
  return eval(tree, leaf_verdicts);
}

json evaluate_tree_annotated(const LogicNode& tree,
                             const std::map<std::string, Verdict>& leaf_verdicts,
                             Verdict* out_verdict) {
  tree.validate();
  check_leaves_resolvable(tree, leaf_verdicts);
  if (out_verdict) *out_verdict = eval(tree, leaf_verdicts);
  return annotate(tree, leaf_verdicts);
}

Verdict overall(const std::map<std::string, Verdict>& criterion_verdicts,
                OverallPolicy policy, const LogicNode* root_tree) {
  if (criterion_verdicts.empty()) {
    throw StructuralError("overall verdict needs at least one criterion");
  }
  if (policy == OverallPolicy::Strict) {
    Verdict v = Verdict::Pass;
    for (const auto& [id, cv] : criterion_verdicts) v = std::min(v, cv);
    return v;
  }
  if (!root_tree) throw StructuralError("tree policy needs a root tree");
  root_tree->validate();
  const auto ids = root_tree->leaf_ids();
  for (const auto& [id, cv] : criterion_verdicts) {
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
      throw StructuralError("root tree misses criterion '" + id + "'");
    }
  }
  return evaluate_tree(*root_tree, criterion_verdicts);
}

LogicNode tree_from_json(const json& doc) {
  if (doc.is_string()) return LogicNode::leaf(doc.get<std::string>());
  if (!doc.is_object()) throw StructuralError("logic tree node must be a string or object");
  auto children_of = [](const json& arr) {
    if (!arr.is_array()) throw StructuralError("tree children must be an array");
    std::vector<LogicNode> kids;
    for (const auto& c : arr) kids.push_back(tree_from_json(c));
    return kids;
  };
  if (doc.contains("and")) return LogicNode::make_and(children_of(doc["and"]));
  if (doc.contains("or")) return LogicNode::make_or(children_of(doc["or"]));
  if (doc.contains("k_of_n")) {
    const auto& spec = doc["k_of_n"];
    return LogicNode::k_of_n(spec.at("k").get<int>(),
                             children_of(spec.at("children")));
  }
  if (doc.contains("weighted")) {
    const auto& spec = doc["weighted"];
    return LogicNode::weighted(spec.at("weights").get<std::vector<double>>(),
                               spec.at("tau").get<double>(),
                               children_of(spec.at("children")));
  }
  throw StructuralError("unknown logic tree node: " + doc.dump());
}

json tree_to_json(const LogicNode& tree) {
  switch (tree.kind) {
    case LogicNode::Kind::Leaf: return tree.leaf_id;
    case LogicNode::Kind::And: {
      json kids = json::array();
      for (const auto& c : tree.children) kids.push_back(tree_to_json(c));
      return json{{"and", kids}};
    }
    case LogicNode::Kind::Or: {
      json kids = json::array();
      for (const auto& c : tree.children) kids.push_back(tree_to_json(c));
      return json{{"or", kids}};
    }
    case LogicNode::Kind::KofN: {
      json kids = json::array();
      for (const auto& c : tree.children) kids.push_back(tree_to_json(c));
      return json{{"k_of_n", {{"k", tree.k}, {"children", kids}}}};
    }
    case LogicNode::Kind::Weighted: {
      json kids = json::array();
      for (const auto& c : tree.children) kids.push_back(tree_to_json(c));
      return json{{"weighted",
                   {{"weights", tree.weights}, {"tau", tree.tau}, {"children", kids}}}};
    }
  }
  throw StructuralError("unhandled tree node kind");
}

}  // namespace uq::aggregate
