#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "helpers.hpp"
#include "uq/config.hpp"
#include "uq/errors.hpp"
#include "uq/harness.hpp"
#include "uq/nn.hpp"

using namespace uq;
using nlohmann::json;
using uq::testing::constant_gaussian_net;

namespace {

// Smallest runnable suite: one generator, one spec, one criterion, an
// untrained parametric estimator.
json tiny_suite() {
  return json::parse(R"({
    "suite": "tiny",
    "seed": 3,
    "generators": {
      "id": {"mean": "sin", "frequency": 2.0,
             "noise": "affine_abs", "noise_base": 0.1, "noise_slope": 0.2,
             "box": [[-3.0, 3.0]]}
    },
    "model": {
      "widths": [1, 4, 2],
      "activations": ["tanh", "identity"],
      "dropout": [0.0],
      "head": "gaussian",
      "init_seed": 9
    },
    "estimator": {"variant": "parametric_gaussian"},
    "data_specs": {
      "id_full": {"kind": "full_odd", "generator": "id", "n": 64}
    },
    "criteria": [
      {"id": "width", "category": "application_specific",
       "data_spec": "id_full",
       "measure": {"kind": "width_stats", "stat": "mean"},
       "comparator": "ge", "threshold": 0.0001,
       "test_depth": ["global"]}
    ]
  })");
}

}  // namespace

TEST_CASE("load_suite builds and runs a minimal config") {
  const auto suite = config::load_suite(tiny_suite(), ".");
  CHECK(suite.name == "tiny");
  CHECK(suite.estimator != nullptr);
  CHECK(suite.estimator->name() == "parametric_gaussian");
  const auto outcome = harness::run_suite(suite);
  CHECK(outcome.overall == aggregate::Verdict::Pass);
}

TEST_CASE("estimator variants build from config") {
  auto doc = tiny_suite();
  doc["estimator"] = {{"variant", "mc_dropout"}, {"rate", 0.2}, {"samples", 8}};
  doc["model"]["dropout"] = {0.2};
  CHECK(config::load_suite(doc, ".").estimator->name() == "mc_dropout");

  doc = tiny_suite();
  doc["estimator"] = {{"variant", "deep_ensemble"}, {"members", 3}};
  CHECK(config::load_suite(doc, ".").estimator->name() == "deep_ensemble");

  doc = tiny_suite();
  doc["estimator"] = {{"variant", "scaled"},
                      {"scale", 1.5},
                      {"inner", {{"variant", "parametric_gaussian"}}}};
  CHECK(config::load_suite(doc, ".").estimator->name() ==
        "scaled(parametric_gaussian)");

  doc = tiny_suite();
  doc["estimator"] = {{"variant", "scaled"},
                      {"calibrate", {{"generator", "id"}, {"n", 128}, {"seed", 5}}},
                      {"inner", {{"variant", "parametric_gaussian"}}}};
  const auto calibrated = config::load_suite(doc, ".");
  const auto* scaled = dynamic_cast<const Scaled*>(calibrated.estimator.get());
  REQUIRE(scaled != nullptr);
  CHECK(scaled->scale() > 0.0);

  doc = tiny_suite();
  doc["estimator"] = {{"variant", "bypass_black_box"}, {"margin", 0.2}};
  CHECK(config::load_suite(doc, ".").estimator->name() == "bypass_black_box");

  doc = tiny_suite();
  doc["estimator"] = {{"variant", "parametric_gaussian"},
                      {"inject_fault", "negative_sigma"}};
  CHECK(config::load_suite(doc, ".").estimator->name() ==
        "fault(parametric_gaussian)");

  doc = tiny_suite();
  doc["estimator"] = {{"variant", "what_is_this"}};
  CHECK_THROWS_AS((void)config::load_suite(doc, "."), ConfigError);
}

TEST_CASE("ensemble members load from checkpoint files") {
  const std::string p1 = "cfg_member1.json";
  const std::string p2 = "cfg_member2.json";
  nn::save_checkpoint(constant_gaussian_net(0.0, 1.0), p1);
  nn::save_checkpoint(constant_gaussian_net(1.0, 1.0), p2);
  auto doc = tiny_suite();
  doc["estimator"] = {{"variant", "deep_ensemble"}, {"checkpoints", {p1, p2}}};
  doc.erase("model");
  const auto suite = config::load_suite(doc, ".");
  const auto p = suite.estimator->predict(std::vector<double>{0.0}, 0);
  CHECK(p.mu == doctest::Approx(0.5));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("missing referenced files are config errors, not runtime errors") {
  auto doc = tiny_suite();
  doc["data_specs"]["critical"] = {{"kind", "curated_set"},
                                   {"path", "does_not_exist.jsonl"}};
  CHECK_THROWS_AS((void)config::load_suite(doc, "."), ConfigError);

  doc = tiny_suite();
  doc["estimator"] = {{"variant", "deep_ensemble"},
                      {"checkpoints", {"missing_model.json"}}};
  CHECK_THROWS_AS((void)config::load_suite(doc, "."), ConfigError);
}

TEST_CASE("config defects are rejected with locations") {
  auto doc = tiny_suite();
  doc["criteria"][0]["measure"]["kind"] = "pdq";
  CHECK_THROWS_AS((void)config::load_suite(doc, "."), ConfigError);

  doc = tiny_suite();
  doc["criteria"][0]["data_spec"] = "nonexistent";
  CHECK_THROWS_AS((void)config::load_suite(doc, "."), ConfigError);

  doc = tiny_suite();
  doc["tests"] = json::array({{{"id", "t"},
                               {"level", "global"},
                               {"criterion", "nope"}}});
  CHECK_THROWS_AS((void)config::load_suite(doc, "."), ConfigError);

  doc = tiny_suite();
  doc["policy"] = "tree";  // tree policy without a root tree
  CHECK_THROWS_AS((void)config::load_suite(doc, "."), ConfigError);

  doc = tiny_suite();
  doc["data_specs"]["a"] = {{"kind", "shifted"}, {"base", "b"}, {"severity", 1.0}};
  doc["data_specs"]["b"] = {{"kind", "shifted"}, {"base", "a"}, {"severity", 1.0}};
  CHECK_THROWS_AS((void)config::load_suite(doc, "."), ConfigError);
}

TEST_CASE("gen requests parse from the gen section") {
  auto doc = tiny_suite();
  doc["gen"] = json::array(
      {{{"generator", "id"}, {"n", 32}, {"seed", 5}, {"file", "out.jsonl"}}});
  const auto reqs = config::parse_gen_requests(doc);
  REQUIRE(reqs.size() == 1);
  CHECK(reqs[0].generator == "id");
  CHECK(reqs[0].n == 32);
  CHECK(reqs[0].file == "out.jsonl");
  CHECK(config::parse_gen_requests(tiny_suite()).empty());
}

TEST_CASE("custom trees and root trees are honored") {
  auto doc = tiny_suite();
  doc["criteria"].push_back({{"id", "second"},
                             {"category", "application_specific"},
                             {"data_spec", "id_full"},
                             {"measure", {{"kind", "width_stats"}, {"stat", "mean"}}},
                             {"comparator", "le"},
                             {"threshold", 1e9},
                             {"test_depth", {"global"}}});
  doc["policy"] = "tree";
  doc["root_tree"] = {{"k_of_n",
                       {{"k", 2},
                        {"children", {"technical", "width", "second"}}}}};
  const auto suite = config::load_suite(doc, ".");
  const auto outcome = harness::run_suite(suite);
  CHECK(outcome.overall == aggregate::Verdict::Pass);
}
