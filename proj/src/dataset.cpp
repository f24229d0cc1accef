#include "uq/dataset.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "uq/errors.hpp"

namespace uq {

namespace {
using json = nlohmann::ordered_json;
}

std::size_t Dataset::width() const {
  if (rows.empty()) return 0;
  const std::size_t w = rows.front().x.size();
  for (const auto& row : rows) {
    if (row.x.size() != w) throw ConfigError("inconsistent feature width in dataset");
  }
  return w;
}

void Dataset::validate() const {
  (void)width();
  for (const auto& row : rows) {
    if (row.sigma_gt && *row.sigma_gt < 0.0) {
      throw ConfigError("sigma_gt must be >= 0");
    }
  }
}

void Dataset::append(const Dataset& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

namespace {

json semantics_to_json(const SemanticPoint& semantics) {
  json out = json::object();
  for (const auto& [key, value] : semantics) {
    if (std::holds_alternative<double>(value)) {
      out[key] = std::get<double>(value);
    } else {
      out[key] = std::get<std::string>(value);
    }
  }
  return out;
}

SemanticPoint semantics_from_json(const json& obj, long row_no) {
  SemanticPoint out;
  for (const auto& [key, value] : obj.items()) {
    if (value.is_number()) {
      out[key] = value.get<double>();
    } else if (value.is_string()) {
      out[key] = value.get<std::string>();
    } else {
      throw ParseError("semantic value for '" + key + "' must be number or string", row_no);
    }
  }
  return out;
}

}  // namespace

Dataset load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path);
  Dataset data;
  std::string line;
  long row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid json: ") + e.what(), row_no);
    }
    DataRow row;
    try {
      row.x = obj.at("x").get<std::vector<double>>();
      row.y = obj.at("y").get<double>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("row missing x or y: ") + e.what(), row_no);
    }
    for (double v : row.x) {
      if (!std::isfinite(v)) throw ParseError("non-finite feature value", row_no);
    }
    if (!std::isfinite(row.y)) throw ParseError("non-finite target", row_no);
    if (obj.contains("sigma_gt")) {
      row.sigma_gt = obj["sigma_gt"].get<double>();
      if (!(*row.sigma_gt >= 0.0)) throw ParseError("sigma_gt must be >= 0", row_no);
    }
    if (obj.contains("mu_gt")) row.mu_gt = obj["mu_gt"].get<double>();
    if (obj.contains("semantics")) {
      if (!obj["semantics"].is_object()) throw ParseError("semantics must be an object", row_no);
      row.semantics = semantics_from_json(obj["semantics"], row_no);
    }
    if (obj.contains("group")) row.group = obj["group"].get<std::string>();
    data.rows.push_back(std::move(row));
    if (data.rows.size() > 1 &&
        data.rows.back().x.size() != data.rows.front().x.size()) {
      throw ParseError("feature width differs from first row", row_no);
    }
  }
  return data;
}

void save_jsonl(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset file: " + path);
  for (const auto& row : data.rows) {
    json obj;
    obj["x"] = row.x;
    obj["y"] = row.y;
    if (row.sigma_gt) obj["sigma_gt"] = *row.sigma_gt;
    if (row.mu_gt) obj["mu_gt"] = *row.mu_gt;
    if (!row.semantics.empty()) obj["semantics"] = semantics_to_json(row.semantics);
    if (row.group) obj["group"] = *row.group;
    out << obj.dump() << "\n";
  }
}

}  // namespace uq
