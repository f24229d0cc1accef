#include "doctest.h"

#include "uq/errors.hpp"
#include "uq/odd.hpp"
#include "uq/rng.hpp"

using namespace uq;
using odd::Containment;

namespace {

// A wide uncertainty range per dimension with a narrower performance core,
// plus scenario sets consistent with the bounds.
odd::OddSpec toy_spec() {
  odd::OddSpec spec;
  spec.dimensions.push_back({"shift", false, -1.0, 8.0, {}});
  spec.dimensions.push_back({"amplitude", false, 0.5, 2.0, {}});
  spec.dimensions.push_back({"road", true, 0, 0, {"urban", "rural"}});
  spec.borderline_eps = 0.05;
  spec.performance_ranges.push_back({"shift", -0.5, 2.0});

  SemanticPoint mid = {{"shift", 3.0}, {"amplitude", 1.2}, {"road", std::string("urban")}};
  SemanticPoint outside = {{"shift", 9.5}, {"amplitude", 1.0}, {"road", std::string("urban")}};
  SemanticPoint edge = {{"shift", 7.9}, {"amplitude", 1.2}, {"road", std::string("rural")}};
  spec.in_domain = {mid};
  spec.out_of_domain = {outside};
  spec.borderline = {edge};
  return spec;
}

}  // namespace

TEST_CASE("contains: midpoints are in, bound violations are out") {
  const auto spec = toy_spec();
  SemanticPoint mid = {{"shift", 3.5}, {"amplitude", 1.25}, {"road", std::string("urban")}};
  CHECK(odd::contains(spec, mid) == Containment::In);

  SemanticPoint above = mid;
  above["shift"] = 8.5;
  CHECK(odd::contains(spec, above) == Containment::Out);

  SemanticPoint wrong_cat = mid;
  wrong_cat["road"] = std::string("offroad");
  CHECK(odd::contains(spec, wrong_cat) == Containment::Out);
}

TEST_CASE("contains: values just inside a bound are borderline") {
  const auto spec = toy_spec();
  // shift range is [-1, 8], band = 0.05 * 9 = 0.45.
  SemanticPoint p = {{"shift", 8.0 - 0.01 * 9.0},
                     {"amplitude", 1.2},
                     {"road", std::string("urban")}};
  CHECK(odd::contains(spec, p) == Containment::Borderline);
}

TEST_CASE("contains: missing dimension is a specification error") {
  const auto spec = toy_spec();
  SemanticPoint partial = {{"shift", 1.0}};
  CHECK_THROWS_AS((void)odd::contains(spec, partial), ConfigError);
}

TEST_CASE("check_consistency: consistent toy spec has no violations") {
  CHECK(odd::check_consistency(toy_spec()).empty());
}

TEST_CASE("check_consistency flags each planted violation kind") {
  auto spec = toy_spec();
  // Out-of-domain point planted inside the bounds.
  spec.out_of_domain.push_back(
      {{"shift", 3.0}, {"amplitude", 1.0}, {"road", std::string("urban")}});
  auto violations = odd::check_consistency(spec);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].kind == odd::Violation::Kind::OutOfDomainPointInside);
  CHECK(violations[0].point_index == 1);

  spec = toy_spec();
  spec.in_domain.push_back(
      {{"shift", 20.0}, {"amplitude", 1.0}, {"road", std::string("urban")}});
  violations = odd::check_consistency(spec);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].kind == odd::Violation::Kind::InDomainPointNotIn);

  spec = toy_spec();
  spec.performance_ranges[0].max = 9.5;  // exceeds the uncertainty range
  violations = odd::check_consistency(spec);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].kind ==
        odd::Violation::Kind::PerformanceRangeExceedsUncertaintyRange);
  CHECK(violations[0].dimension == "shift");

  spec = toy_spec();
  spec.borderline.push_back(
      {{"shift", 3.0}, {"amplitude", 1.2}, {"road", std::string("urban")}});
  violations = odd::check_consistency(spec);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].kind == odd::Violation::Kind::BorderlinePointNotBorderline);
}

TEST_CASE("contains partitions semantic space deterministically") {
  const auto spec = toy_spec();
  Rng r(3, 0);
  for (int i = 0; i < 500; ++i) {
    SemanticPoint p = {{"shift", r.uniform(-3, 11)},
                       {"amplitude", r.uniform(0, 3)},
                       {"road", std::string(r.uniform() < 0.5 ? "urban" : "rural")}};
    const auto a = odd::contains(spec, p);
    const auto b = odd::contains(spec, p);
    CHECK(a == b);
  }
}

TEST_CASE("odd spec validation") {
  auto spec = toy_spec();
  spec.borderline_eps = 0.7;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = toy_spec();
  spec.performance_ranges.push_back({"nonexistent", 0, 1});
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}
