#include "uq/odd.hpp"

#include <algorithm>
#include <cmath>

#include "uq/errors.hpp"

namespace uq::odd {

void SemanticDimension::validate() const {
  if (name.empty()) throw ConfigError("semantic dimension needs a name");
  if (categorical) {
    if (allowed.empty()) throw ConfigError("categorical dimension '" + name + "' needs allowed values");
  } else if (!(min < max)) {
    throw ConfigError("dimension '" + name + "' needs min < max");
  }
}

std::string to_string(Containment c) {
  switch (c) {
    case Containment::In: return "in";
    case Containment::Borderline: return "borderline";
    case Containment::Out: return "out";
  }
  return "out";
}

void OddSpec::validate() const {
  if (dimensions.empty()) throw ConfigError("odd spec needs at least one dimension");
  for (const auto& d : dimensions) d.validate();
  if (!(borderline_eps > 0.0 && borderline_eps < 0.5)) {
    throw ConfigError("borderline eps must be in (0, 0.5)");
  }
  for (const auto& pr : performance_ranges) {
    const auto it = std::find_if(dimensions.begin(), dimensions.end(),
                                 [&](const auto& d) { return d.name == pr.dimension; });
    if (it == dimensions.end()) {
      throw ConfigError("performance range names unknown dimension '" + pr.dimension + "'");
    }
    if (it->categorical) {
      throw ConfigError("performance range on categorical dimension '" + pr.dimension + "'");
    }
    if (!(pr.min < pr.max)) {
      throw ConfigError("performance range for '" + pr.dimension + "' needs min < max");
    }
  }
}

namespace {

double numeric_value(const SemanticPoint& point, const std::string& dim) {
  const auto it = point.find(dim);
  if (it == point.end()) {
    throw ConfigError("semantic point missing dimension '" + dim + "'");
  }
  if (!std::holds_alternative<double>(it->second)) {
    throw ConfigError("dimension '" + dim + "' expects a numeric value");
  }
  return std::get<double>(it->second);
}

std::string category_value(const SemanticPoint& point, const std::string& dim) {
  const auto it = point.find(dim);
  if (it == point.end()) {
    throw ConfigError("semantic point missing dimension '" + dim + "'");
  }
  if (!std::holds_alternative<std::string>(it->second)) {
    throw ConfigError("dimension '" + dim + "' expects a categorical value");
  }
  return std::get<std::string>(it->second);
}

}  // namespace

Containment contains(const OddSpec& odd, const SemanticPoint& point) {
  bool borderline = false;
  for (const auto& dim : odd.dimensions) {
    if (dim.categorical) {
      const auto value = category_value(point, dim.name);
      if (std::find(dim.allowed.begin(), dim.allowed.end(), value) ==
          dim.allowed.end()) {
        return Containment::Out;
      }
      continue;
    }
    const double v = numeric_value(point, dim.name);
    if (v < dim.min || v > dim.max) return Containment::Out;
    const double band = odd.borderline_eps * (dim.max - dim.min);
    if (v - dim.min < band || dim.max - v < band) borderline = true;
  }
  return borderline ? Containment::Borderline : Containment::In;
}

std::vector<Violation> check_consistency(const OddSpec& odd) {
  odd.validate();
  std::vector<Violation> violations;

  for (std::size_t i = 0; i < odd.in_domain.size(); ++i) {
    if (contains(odd, odd.in_domain[i]) == Containment::Out) {
      violations.push_back({Violation::Kind::InDomainPointNotIn, "", i,
                            "in_domain point " + std::to_string(i) +
                                " classified out"});
    }
  }
  for (std::size_t i = 0; i < odd.out_of_domain.size(); ++i) {
    if (contains(odd, odd.out_of_domain[i]) == Containment::In) {
      violations.push_back({Violation::Kind::OutOfDomainPointInside, "", i,
                            "out_of_domain point " + std::to_string(i) +
                                " classified in"});
    }
  }
  for (std::size_t i = 0; i < odd.borderline.size(); ++i) {
    if (contains(odd, odd.borderline[i]) != Containment::Borderline) {
      violations.push_back({Violation::Kind::BorderlinePointNotBorderline, "",
                            i,
                            "borderline point " + std::to_string(i) +
                                " not classified borderline"});
    }
  }
  for (const auto& pr : odd.performance_ranges) {
    const auto it = std::find_if(
        odd.dimensions.begin(), odd.dimensions.end(),
        [&](const auto& d) { return d.name == pr.dimension; });
    if (pr.min < it->min || pr.max > it->max) {
      violations.push_back(
          {Violation::Kind::PerformanceRangeExceedsUncertaintyRange,
           pr.dimension, std::nullopt,
           "performance range of '" + pr.dimension +
               "' exceeds the uncertainty range"});
    }
  }
  return violations;
}

}  // namespace uq::odd
