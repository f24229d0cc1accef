#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace uq {

// A semantic annotation value: numeric (continuous dimension) or a category.
using SemanticValue = std::variant<double, std::string>;
using SemanticPoint = std::map<std::string, SemanticValue>;

struct DataRow {
  std::vector<double> x;
  double y = 0.0;
  // Ground-truth noise level and generator mean at x, when the data source
  // knows them (synthetic generators always do, curated files may).
  std::optional<double> sigma_gt;
  std::optional<double> mu_gt;
  SemanticPoint semantics;
  std::optional<std::string> group;
};

struct Dataset {
  std::vector<DataRow> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }

  // Feature width; throws ConfigError on inconsistent rows, 0 when empty.
  std::size_t width() const;

  // Throws ConfigError on inconsistent width or negative sigma_gt.
  void validate() const;

  void append(const Dataset& other);
};

// JSON Lines persistence. One row object per line:
//   {"x":[...], "y":..., "sigma_gt":..., "mu_gt":..., "semantics":{...}, "group":"..."}
// load reports schema violations as ParseError with the offending row number.
Dataset load_jsonl(const std::string& path);
void save_jsonl(const Dataset& data, const std::string& path);

}  // namespace uq
