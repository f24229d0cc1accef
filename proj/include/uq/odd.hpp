#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uq/dataset.hpp"

namespace uq::odd {

struct SemanticDimension {
  std::string name;
  bool categorical = false;
  double min = 0.0;  // continuous bounds, inclusive
  double max = 0.0;
  std::vector<std::string> allowed;  // categorical values

  void validate() const;
};

enum class Containment { In, Borderline, Out };
std::string to_string(Containment c);

// Machine-checkable operational design domain: semantic boundaries plus
// in/out/borderline scenario sets that must agree with those boundaries.
// The borderline band sits just inside each continuous bound, eps of the
// dimension's range wide.
struct OddSpec {
  std::vector<SemanticDimension> dimensions;
  double borderline_eps = 0.05;  // in (0, 0.5)
  // Optional performance-ODD sub-range per continuous dimension; must lie
  // inside the (wider) uncertainty range above.
  struct PerformanceRange {
    std::string dimension;
    double min = 0.0;
    double max = 0.0;
  };
  std::vector<PerformanceRange> performance_ranges;

  std::vector<SemanticPoint> in_domain;
  std::vector<SemanticPoint> out_of_domain;
  std::vector<SemanticPoint> borderline;

  void validate() const;  // structural checks only; consistency is separate
};

// OUT if any dimension is violated; BORDERLINE if all inside but some
// continuous value lies within eps*range of a bound; IN otherwise.
// A point missing a dimension value -> ConfigError.
Containment contains(const OddSpec& odd, const SemanticPoint& point);

struct Violation {
  enum class Kind {
    InDomainPointNotIn,
    OutOfDomainPointInside,
    BorderlinePointNotBorderline,
    PerformanceRangeExceedsUncertaintyRange,
  };
  Kind kind;
  std::string dimension;        // for range violations
  std::optional<std::size_t> point_index;  // into the relevant scenario set
  std::string message;
};

// Re-classifies every scenario point and checks range nesting. Violations
// are data, not errors: an empty list means the spec is self-consistent.
std::vector<Violation> check_consistency(const OddSpec& odd);

}  // namespace uq::odd
