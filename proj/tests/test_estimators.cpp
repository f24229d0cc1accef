#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "uq/errors.hpp"
#include "uq/estimators.hpp"
#include "uq/metrics.hpp"
#include "uq/rng.hpp"
#include "uq/synthdata.hpp"

using namespace uq;
using uq::testing::AnalyticEstimator;
using uq::testing::canonical_oracle;
using uq::testing::constant_gaussian_net;
using uq::testing::random_net;

TEST_CASE("parametric gaussian reads the head and attributes everything to aleatoric") {
  ParametricGaussian est(constant_gaussian_net(0.5, 1.25));
  const auto p = est.predict(std::vector<double>{0.0}, 0);
  CHECK(p.mu == doctest::Approx(0.5));
  CHECK(p.sigma_total == doctest::Approx(1.25));
  CHECK(*p.sigma_aleatoric == doctest::Approx(1.25));
  CHECK(*p.sigma_epistemic == doctest::Approx(0.0));
}

TEST_CASE("ensemble of identical members has zero epistemic spread") {
  std::vector<nn::Mlp> members = {constant_gaussian_net(1.0, 0.5),
                                  constant_gaussian_net(1.0, 0.5),
                                  constant_gaussian_net(1.0, 0.5)};
  DeepEnsemble est(std::move(members));
  const auto p = est.predict(std::vector<double>{0.3}, 0);
  CHECK(*p.sigma_epistemic == doctest::Approx(0.0));
  CHECK(p.sigma_total == doctest::Approx(0.5));
}

TEST_CASE("two-member ensemble follows the analytic combination rule") {
  std::vector<nn::Mlp> members = {constant_gaussian_net(0.0, 1.0),
                                  constant_gaussian_net(2.0, 1.0)};
  DeepEnsemble est(std::move(members));
  const auto p = est.predict(std::vector<double>{0.0}, 0);
  CHECK(p.mu == doctest::Approx(1.0));
  CHECK(*p.sigma_aleatoric == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(*p.sigma_epistemic == doctest::Approx(1.0));
  CHECK(p.sigma_total == doctest::Approx(std::sqrt(2.0)).epsilon(1e-3));
  const auto parts = decompose(p);
  CHECK(parts.first == doctest::Approx(*p.sigma_aleatoric));
  CHECK(parts.second == doctest::Approx(*p.sigma_epistemic));
}

TEST_CASE("ensemble combination equals direct mixture moments on random member sets") {
  Rng r(5, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const int m_count = 2 + static_cast<int>(r.index(5));
    std::vector<nn::Mlp> members;
    std::vector<double> mus;
    std::vector<double> sigmas;
    for (int m = 0; m < m_count; ++m) {
      const double mu = r.uniform(-2, 2);
      const double sigma = 0.2 + r.uniform();
      members.push_back(constant_gaussian_net(mu, sigma));
      mus.push_back(mu);
      sigmas.push_back(sigma);
    }
    DeepEnsemble est(std::move(members));
    const auto p = est.predict(std::vector<double>{0.0}, 0);
    // Mixture moments computed directly.
    double mean = 0.0;
    for (double v : mus) mean += v;
    mean /= m_count;
    double second = 0.0;
    for (int m = 0; m < m_count; ++m) second += sigmas[m] * sigmas[m] + mus[m] * mus[m];
    second /= m_count;
    const double variance = second - mean * mean;
    CHECK(p.mu == doctest::Approx(mean).epsilon(1e-9));
    CHECK(p.sigma_total * p.sigma_total == doctest::Approx(variance).epsilon(1e-3));
  }
}

TEST_CASE("mc dropout is seed-deterministic with positive epistemic spread") {
  auto net = random_net({1, 16, 2}, nn::Activation::Tanh, nn::HeadKind::Gaussian, 13);
  McDropout est(std::move(net), 0.5, 200);
  const std::vector<double> x = {0.4};
  const auto a = est.predict(x, 777);
  const auto b = est.predict(x, 777);
  CHECK(a.mu == b.mu);
  CHECK(a.sigma_total == b.sigma_total);
  CHECK(*a.sigma_epistemic > 0.0);
  const auto c = est.predict(x, 778);
  CHECK(c.mu != a.mu);  // different seed, different sample set
}

TEST_CASE("estimator invariants are enforced at construction") {
  CHECK_THROWS_AS(McDropout(constant_gaussian_net(0, 1), 0.2, 1), ConfigError);
  CHECK_THROWS_AS(DeepEnsemble({constant_gaussian_net(0, 1)}), ConfigError);
  CHECK_THROWS_AS(Scaled(nullptr, 1.0), ConfigError);
  CHECK_THROWS_AS(Scaled(canonical_oracle(), 0.0), ConfigError);
  CHECK_THROWS_AS(BypassBlackBox(nullptr, 1, 0.0), ConfigError);
}

TEST_CASE("fit_scale closed form on fixed residuals") {
  // mu = 0, sigma = 1, residuals are the targets themselves.
  auto flat = std::make_shared<AnalyticEstimator>(
      [](std::span<const double>) { return 0.0; },
      [](std::span<const double>) { return 1.0; });
  Dataset calib;
  for (double y : {1.0, 1.0, 2.0, 2.0}) {
    DataRow row;
    row.x = {0.0};
    row.y = y;
    calib.rows.push_back(row);
  }
  const auto [scaled, s] = fit_scale(flat, calib, 0);
  CHECK(s == doctest::Approx(std::sqrt(2.5)).epsilon(1e-12));
  CHECK(scaled->predict(std::vector<double>{0.0}, 0).sigma_total ==
        doctest::Approx(std::sqrt(2.5)));

  Dataset fixed_point;
  for (double y : {1.0, -1.0, 1.0, -1.0}) {
    DataRow row;
    row.x = {0.0};
    row.y = y;
    fixed_point.rows.push_back(row);
  }
  CHECK(fit_scale(flat, fixed_point, 0).second == doctest::Approx(1.0));

  CHECK_THROWS_AS((void)fit_scale(flat, Dataset{}, 0), ConfigError);
}

TEST_CASE("fit_scale recovers a halved sigma and lowers calibration NLL") {
  const auto g = synth::canonical_task();
  auto halved = std::make_shared<AnalyticEstimator>(
      [g](std::span<const double> x) { return g.mean_at(x); },
      [g](std::span<const double> x) { return 0.5 * g.noise_at(x); });
  const auto calib = synth::generate(g, 2048, 91);
  const auto [scaled, s] = fit_scale(halved, calib, 3);
  CHECK(s > 1.8);
  CHECK(s < 2.2);

  auto mean_nll = [&](const Estimator& est) {
    const auto preds = evaluate_dataset(est, calib, 3);
    std::vector<double> ys;
    for (const auto& row : calib.rows) ys.push_back(row.y);
    return metrics::nll_mean(preds, ys);
  };
  CHECK(mean_nll(*scaled) < mean_nll(*halved));
}

TEST_CASE("decompose guards missing and inconsistent components") {
  UncertaintyPrediction p;
  p.mu = 0;
  p.sigma_total = std::sqrt(2.0);
  p.sigma_aleatoric = 1.0;
  p.sigma_epistemic = 1.0;
  const auto parts = decompose(p);
  CHECK(parts.first == doctest::Approx(1.0));
  CHECK(parts.second == doctest::Approx(1.0));

  UncertaintyPrediction missing;
  missing.mu = 0;
  missing.sigma_total = 1.0;
  CHECK_THROWS_AS((void)decompose(missing), CapabilityError);

  UncertaintyPrediction broken;
  broken.mu = 0;
  broken.sigma_total = 1.0;
  broken.sigma_aleatoric = 1.0;
  broken.sigma_epistemic = 1.0;
  CHECK_THROWS_AS((void)decompose(broken), StateError);
}

TEST_CASE("chain: single stage with no incoming sigma equals predict") {
  auto oracle = canonical_oracle();
  std::vector<ChainStage> chain(1);
  chain[0].estimator = oracle;
  const std::vector<double> x = {1.5};
  const auto out = propagate_chain(chain, x, 0.0, 16, 9).as_prediction();
  const auto direct = oracle->predict(x, rng::derive(9, 0));
  CHECK(out.mu == direct.mu);
  CHECK(out.sigma_total == direct.sigma_total);
}

TEST_CASE("chain: bypass adds its margin to incoming sigma") {
  std::vector<ChainStage> chain(1);
  chain[0].bypass = std::make_shared<BypassBlackBox>(
      [](std::span<const double> x) { return x[0]; }, 1, 0.1);
  const auto out = propagate_chain(chain, std::vector<double>{2.0}, 0.3, 16, 0);
  CHECK(out.mu == doctest::Approx(2.0));
  CHECK(*out.sigma_total == doctest::Approx(0.4));
}

TEST_CASE("chain: linear stage doubles incoming sigma (analytic propagation)") {
  auto linear = std::make_shared<AnalyticEstimator>(
      [](std::span<const double> x) { return 2.0 * x[0]; },
      [](std::span<const double>) { return 1e-6; });
  std::vector<ChainStage> chain(1);
  chain[0].estimator = linear;
  const auto out = propagate_chain(chain, std::vector<double>{1.0}, 1.0, 100000, 11);
  CHECK(*out.sigma_total == doctest::Approx(2.0).epsilon(0.03));
}

TEST_CASE("chain: two stages compose and internal stages suppress sigma") {
  auto noisy = std::make_shared<AnalyticEstimator>(
      [](std::span<const double> x) { return x[0]; },
      [](std::span<const double>) { return 0.5; });
  std::vector<ChainStage> chain(2);
  chain[0].estimator = noisy;
  chain[1].estimator = noisy;
  const auto out = propagate_chain(chain, std::vector<double>{1.0}, 0.0, 4096, 3);
  // First stage contributes sigma 0.5; second sees it and adds its own.
  CHECK(*out.sigma_total == doctest::Approx(std::sqrt(0.5)).epsilon(0.05));

  std::vector<ChainStage> internal_last = chain;
  internal_last[1].internal = true;
  const auto quiet = propagate_chain(internal_last, std::vector<double>{1.0}, 0.0, 4096, 3);
  CHECK(!quiet.sigma_total.has_value());
  CHECK_THROWS_AS((void)quiet.as_prediction(), CapabilityError);
}

TEST_CASE("chain rejects invalid incoming uncertainty") {
  std::vector<ChainStage> chain(1);
  chain[0].estimator = canonical_oracle();
  CHECK_THROWS_AS(
      (void)propagate_chain(chain, std::vector<double>{0.0}, -0.1, 16, 0),
      DomainError);
  CHECK_THROWS_AS(
      (void)propagate_chain(chain, std::vector<double>{0.0}, 0.5, 1, 0),
      ConfigError);
}

TEST_CASE("scaling preserves the ordering of normalized residuals") {
  const auto g = synth::canonical_task();
  const auto data = synth::generate(g, 256, 17);
  auto oracle = canonical_oracle();
  Scaled scaled(oracle, 1.7);
  const auto base = evaluate_dataset(*oracle, data, 5);
  const auto post = evaluate_dataset(scaled, data, 5);
  std::vector<std::size_t> order_base(data.size()), order_post(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) order_base[i] = order_post[i] = i;
  auto by_residual = [&](const std::vector<UncertaintyPrediction>& preds) {
    return [&](std::size_t a, std::size_t b) {
      return std::abs(metrics::normalized_residual(preds[a], data.rows[a].y)) <
             std::abs(metrics::normalized_residual(preds[b], data.rows[b].y));
    };
  };
  std::sort(order_base.begin(), order_base.end(), by_residual(base));
  std::sort(order_post.begin(), order_post.end(), by_residual(post));
  CHECK(order_base == order_post);
}

TEST_CASE("fault fixtures misbehave on demand") {
  auto healthy = std::make_shared<ParametricGaussian>(constant_gaussian_net(0, 1));
  FaultInjected bad_sigma(healthy, FaultInjected::Fault::NegativeSigma);
  const auto p = bad_sigma.predict(std::vector<double>{0.0}, 0);
  CHECK(p.sigma_total == doctest::Approx(-1.0));
  CHECK(prediction_issue(p).has_value());

  FaultInjected unseeded(healthy, FaultInjected::Fault::Unseeded);
  const auto a = unseeded.predict(std::vector<double>{0.0}, 1);
  const auto b = unseeded.predict(std::vector<double>{0.0}, 1);
  CHECK(a.mu != b.mu);

  FaultInjected swallow(healthy, FaultInjected::Fault::SwallowInvalidInput);
  const std::vector<double> nan_x = {std::numeric_limits<double>::quiet_NaN()};
  CHECK_NOTHROW((void)swallow.predict(nan_x, 0));
}
