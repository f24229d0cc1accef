#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "helpers.hpp"
#include "uq/datasel.hpp"
#include "uq/errors.hpp"
#include "uq/rng.hpp"

using namespace uq;
using uq::testing::AnalyticEstimator;
using uq::testing::canonical_oracle;

namespace {

datasel::SelectionContext context_for(const std::map<std::string, synth::Generator>& gens,
                                      const Dataset* base, std::uint64_t seed) {
  datasel::SelectionContext ctx;
  ctx.generators = &gens;
  ctx.base = base;
  ctx.seed = seed;
  return ctx;
}

}  // namespace

TEST_CASE("quantile slice [0.99, 1] of 100 distinct scores keeps only the worst point") {
  // Estimator with |r| = |y| at every point; targets are 100 distinct values.
  auto flat = std::make_shared<AnalyticEstimator>(
      [](std::span<const double>) { return 0.0; },
      [](std::span<const double>) { return 1.0; });
  Dataset base;
  for (int i = 0; i < 100; ++i) {
    DataRow row;
    row.x = {static_cast<double>(i)};
    row.y = static_cast<double>(i);
    base.rows.push_back(row);
  }
  datasel::DataSpec spec;
  spec.kind = datasel::DataSpecKind::QuantileSlice;
  spec.score = metrics::ScoreKind::AbsNormalizedResidual;
  spec.q_lo = 0.99;
  spec.q_hi = 1.0;
  std::map<std::string, synth::Generator> gens;
  const auto out = datasel::select(spec, context_for(gens, &base, 0), flat.get());
  REQUIRE(out.size() == 1);
  CHECK(out.rows[0].y == doctest::Approx(99.0));
}

TEST_CASE("semantic slice keeps exactly the annotated rows") {
  std::map<std::string, synth::Generator> gens;
  gens["task"] = synth::canonical_task();
  const auto cells = datasel::sweep(gens.at("task"), "shift", {0.0, 2.0}, 32, 5);
  Dataset base;
  for (const auto& c : cells) base.append(c);

  datasel::DataSpec spec;
  spec.kind = datasel::DataSpecKind::SemanticSlice;
  spec.dim = "shift";
  spec.range_lo = 0.0;
  spec.range_hi = 0.0;
  const auto out = datasel::select(spec, context_for(gens, &base, 0), nullptr);
  CHECK(out.size() == 32);
  for (const auto& row : out.rows) {
    CHECK(std::get<double>(row.semantics.at("shift")) == doctest::Approx(0.0));
  }
}

TEST_CASE("semantic slice equals a naive filter on random ranges") {
  std::map<std::string, synth::Generator> gens;
  gens["task"] = synth::canonical_task();
  const auto cells =
      datasel::sweep(gens.at("task"), "amplitude", {0.5, 1.0, 1.5, 2.0}, 16, 9);
  Dataset base;
  for (const auto& c : cells) base.append(c);

  Rng r(11, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const double lo = r.uniform(0.0, 2.0);
    const double hi = lo + r.uniform(0.0, 2.0);
    datasel::DataSpec spec;
    spec.kind = datasel::DataSpecKind::SemanticSlice;
    spec.dim = "amplitude";
    spec.range_lo = lo;
    spec.range_hi = hi;
    Dataset expected;
    for (const auto& row : base.rows) {
      const double v = std::get<double>(row.semantics.at("amplitude"));
      if (v >= lo && v <= hi) expected.rows.push_back(row);
    }
    if (expected.empty()) {
      CHECK_THROWS_AS(
          (void)datasel::select(spec, context_for(gens, &base, 0), nullptr),
          EmptySelection);
      continue;
    }
    const auto out = datasel::select(spec, context_for(gens, &base, 0), nullptr);
    REQUIRE(out.size() == expected.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out.rows[i].x == expected.rows[i].x);
    }
  }
}

TEST_CASE("corrupt severity zero is the identity for every kind") {
  const auto data = synth::generate(synth::canonical_task(), 64, 3);
  for (auto kind : {datasel::CorruptionKind::GaussianNoise,
                    datasel::CorruptionKind::FeatureScale,
                    datasel::CorruptionKind::ConstantOffset,
                    datasel::CorruptionKind::FeatureDropout}) {
    const auto out = datasel::corrupt(data, kind, 0.0, 99);
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(out.rows[i].x == data.rows[i].x);
      CHECK(out.rows[i].y == data.rows[i].y);
    }
  }
}

TEST_CASE("constant offset shifts features and leaves targets alone") {
  Dataset data;
  DataRow row;
  row.x = {0.0};
  row.y = 5.0;
  data.rows.push_back(row);
  const auto out = datasel::corrupt(data, datasel::CorruptionKind::ConstantOffset, 1.0, 0);
  CHECK(out.rows[0].x[0] == doctest::Approx(1.0));
  CHECK(out.rows[0].y == doctest::Approx(5.0));
}

TEST_CASE("gaussian corruption has the configured perturbation scale") {
  const auto data = synth::generate(synth::canonical_task(), 100000, 21);
  const auto out = datasel::corrupt(data, datasel::CorruptionKind::GaussianNoise, 0.5, 4);
  double sq = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double d = out.rows[i].x[0] - data.rows[i].x[0];
    sq += d * d;
  }
  CHECK(std::sqrt(sq / static_cast<double>(data.size())) ==
        doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("sweep: single-value grid equals plain generation") {
  const auto g = synth::canonical_task();
  const auto cells = datasel::sweep(g, "shift", {0.0}, 64, 13);
  REQUIRE(cells.size() == 1);
  const auto direct = synth::generate(g, 64, rng::derive(13, 0));
  REQUIRE(cells[0].size() == direct.size());
  for (std::size_t i = 0; i < direct.size(); ++i) {
    CHECK(cells[0].rows[i].x == direct.rows[i].x);
    CHECK(cells[0].rows[i].y == direct.rows[i].y);
  }
}

TEST_CASE("sweep varies only the requested axis") {
  const auto g = synth::canonical_task();
  const auto cells = datasel::sweep(g, "shift", {0.0, 4.0}, 2048, 17);
  REQUIRE(cells.size() == 2);
  auto mean_x = [](const Dataset& d) {
    double acc = 0.0;
    for (const auto& row : d.rows) acc += row.x[0];
    return acc / static_cast<double>(d.size());
  };
  CHECK(mean_x(cells[1]) - mean_x(cells[0]) == doctest::Approx(4.0).epsilon(0.05));
  for (const auto& row : cells[1].rows) {
    CHECK(std::get<double>(row.semantics.at("shift")) == doctest::Approx(4.0));
    CHECK(std::get<double>(row.semantics.at("amplitude")) == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS((void)datasel::sweep(g, "not_a_dim", {0.0}, 4, 0), ConfigError);
}

TEST_CASE("search finds the peak of a concave toy score") {
  datasel::SearchConfig cfg;
  cfg.box_lo = {-5.0};
  cfg.box_hi = {5.0};
  cfg.restarts = 10;
  cfg.steps = 200;
  cfg.seed = 3;
  auto objective = [](std::span<const double> x) {
    return 10.0 - (x[0] - 2.0) * (x[0] - 2.0);
  };
  const auto hits = datasel::search(objective, cfg);
  REQUIRE(hits.size() == 10);
  CHECK(std::abs(hits.front().x[0] - 2.0) < 0.05);
  CHECK(hits.front().score == doctest::Approx(10.0).epsilon(1e-3));
  // Sorted worst-first.
  for (std::size_t i = 1; i < hits.size(); ++i) {
    CHECK(hits[i - 1].score >= hits[i].score);
  }
}

TEST_CASE("search with zero budget returns the seeded start point") {
  datasel::SearchConfig cfg;
  cfg.box_lo = {-1.0};
  cfg.box_hi = {1.0};
  cfg.restarts = 1;
  cfg.steps = 0;
  cfg.seed = 5;
  auto objective = [](std::span<const double> x) { return x[0]; };
  const auto hits = datasel::search(objective, cfg);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].score == doctest::Approx(hits[0].x[0]));
  // Same seed, same start.
  const auto again = datasel::search(objective, cfg);
  CHECK(again[0].x == hits[0].x);
}

TEST_CASE("search requires a bounded box") {
  datasel::SearchConfig cfg;
  cfg.box_lo = {0.0};
  cfg.box_hi = {std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS((void)datasel::search([](std::span<const double>) { return 0.0; }, cfg),
                  ConfigError);
}

TEST_CASE("full_odd and search_generated selections resolve through the context") {
  std::map<std::string, synth::Generator> gens;
  gens["task"] = synth::canonical_task();

  datasel::DataSpec full;
  full.kind = datasel::DataSpecKind::FullOdd;
  full.generator = "task";
  full.n = 32;
  const auto data = datasel::select(full, context_for(gens, nullptr, 7), nullptr);
  CHECK(data.size() == 32);

  datasel::DataSpec searchy;
  searchy.kind = datasel::DataSpecKind::SearchGenerated;
  searchy.generator = "task";
  searchy.search.box_lo = {-3.0};
  searchy.search.box_hi = {3.0};
  searchy.search.restarts = 3;
  searchy.search.steps = 40;
  const auto oracle = canonical_oracle();
  const auto found = datasel::select(searchy, context_for(gens, nullptr, 7), oracle.get());
  CHECK(found.size() == 3);
  for (const auto& row : found.rows) {
    CHECK(row.mu_gt.has_value());
    CHECK(row.sigma_gt.has_value());
  }
}

TEST_CASE("shifted spec corrupts its base selection") {
  std::map<std::string, synth::Generator> gens;
  gens["task"] = synth::canonical_task();
  datasel::DataSpec base;
  base.kind = datasel::DataSpecKind::FullOdd;
  base.generator = "task";
  base.n = 16;
  datasel::DataSpec shifted;
  shifted.kind = datasel::DataSpecKind::Shifted;
  shifted.base = std::make_shared<datasel::DataSpec>(base);
  shifted.corruption = datasel::CorruptionKind::ConstantOffset;
  shifted.severity = 2.0;
  const auto plain = datasel::select(*shifted.base, context_for(gens, nullptr, 3), nullptr);
  const auto out = datasel::select(shifted, context_for(gens, nullptr, 3), nullptr);
  REQUIRE(out.size() == plain.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out.rows[i].x[0] == doctest::Approx(plain.rows[i].x[0] + 2.0));
  }
}

TEST_CASE("mask sensitivity: ignored features score zero") {
  // sigma depends only on feature 0.
  auto est = std::make_shared<AnalyticEstimator>(
      [](std::span<const double> x) { return x[0] + x[1]; },
      [](std::span<const double> x) { return 0.1 + std::abs(x[0]); }, 2);
  Dataset data;
  Rng r(19, 0);
  for (int i = 0; i < 50; ++i) {
    DataRow row;
    row.x = {r.uniform(-2, 2), r.uniform(-2, 2)};
    row.y = 0.0;
    data.rows.push_back(row);
  }
  const auto sens = datasel::mask_sensitivity(*est, data, 0);
  REQUIRE(sens.size() == 2);
  CHECK(sens[0] > 0.0);
  CHECK(sens[1] == doctest::Approx(0.0));

  // Constant dataset: masking changes nothing anywhere.
  Dataset constant;
  for (int i = 0; i < 10; ++i) {
    DataRow row;
    row.x = {1.0, 2.0};
    row.y = 0.0;
    constant.rows.push_back(row);
  }
  const auto zero = datasel::mask_sensitivity(*est, constant, 0);
  CHECK(zero[0] == doctest::Approx(0.0));
  CHECK(zero[1] == doctest::Approx(0.0));
}

TEST_CASE("selections are permutation-equivariant over base row order") {
  std::map<std::string, synth::Generator> gens;
  gens["task"] = synth::canonical_task();
  const auto cells = datasel::sweep(gens.at("task"), "shift", {0.0, 1.0}, 64, 3);
  Dataset base;
  for (const auto& c : cells) base.append(c);
  Dataset reversed = base;
  std::reverse(reversed.rows.begin(), reversed.rows.end());

  datasel::DataSpec spec;
  spec.kind = datasel::DataSpecKind::SemanticSlice;
  spec.dim = "shift";
  spec.range_lo = 1.0;
  spec.range_hi = 1.0;
  auto keys = [](const Dataset& d) {
    std::vector<std::vector<double>> xs;
    for (const auto& row : d.rows) xs.push_back(row.x);
    std::sort(xs.begin(), xs.end());
    return xs;
  };
  const auto a = datasel::select(spec, context_for(gens, &base, 5), nullptr);
  const auto b = datasel::select(spec, context_for(gens, &reversed, 5), nullptr);
  CHECK(keys(a) == keys(b));
}

TEST_CASE("an empty selection is an error, never a silent pass") {
  const std::string path = "datasel_empty.jsonl";
  { std::ofstream out(path); }
  datasel::DataSpec spec;
  spec.kind = datasel::DataSpecKind::CuratedSet;
  spec.path = path;
  std::map<std::string, synth::Generator> gens;
  CHECK_THROWS_AS(
      (void)datasel::select(spec, context_for(gens, nullptr, 0), nullptr),
      EmptySelection);
  std::remove(path.c_str());
}

TEST_CASE("mask sensitivity equals a direct two-pass computation on one feature") {
  auto est = std::make_shared<AnalyticEstimator>(
      [](std::span<const double> x) { return x[0]; },
      [](std::span<const double> x) { return 0.5 + x[0] * x[0]; }, 1);
  Dataset data;
  Rng r(23, 0);
  double mean = 0.0;
  for (int i = 0; i < 40; ++i) {
    DataRow row;
    row.x = {r.uniform(-1, 1)};
    row.y = 0.0;
    mean += row.x[0];
    data.rows.push_back(row);
  }
  mean /= 40.0;
  double expected = 0.0;
  for (const auto& row : data.rows) {
    const double base_sigma = 0.5 + row.x[0] * row.x[0];
    const double masked_sigma = 0.5 + mean * mean;
    expected += std::abs(masked_sigma - base_sigma);
  }
  expected /= 40.0;
  const auto sens = datasel::mask_sensitivity(*est, data, 0);
  CHECK(sens[0] == doctest::Approx(expected).epsilon(1e-12));
}
