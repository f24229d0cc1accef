#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "helpers.hpp"
#include "uq/errors.hpp"
#include "uq/metrics.hpp"
#include "uq/rng.hpp"

using namespace uq;
using metrics::ScoreKind;

namespace {

UncertaintyPrediction pred(double mu, double sigma) {
  UncertaintyPrediction p;
  p.mu = mu;
  p.sigma_total = sigma;
  return p;
}

}  // namespace

TEST_CASE("normalized residual basic values") {
  CHECK(metrics::normalized_residual(pred(1, 2), 3) == doctest::Approx(1.0));
  CHECK(metrics::normalized_residual(pred(0.4, 7), 0.4) == doctest::Approx(0.0));
}

TEST_CASE("normalized residuals of a perfectly specified estimator are standard normal") {
  Rng r(42, 0);
  const std::size_t n = 100000;
  double sum = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = r.uniform(-2, 2);
    const double sigma = r.uniform(0.5, 2.0);
    const double y = mu + sigma * r.normal();
    const double res = metrics::normalized_residual(pred(mu, sigma), y);
    sum += res;
    sq += res * res;
  }
  const double mean = sum / n;
  const double stddev = std::sqrt(sq / n - mean * mean);
  CHECK(stddev > 0.99);
  CHECK(stddev < 1.01);
}

TEST_CASE("ece_regression degenerate cases hit 0.5") {
  // All-tiny sigmas that miss every target: zero coverage at every level.
  std::vector<UncertaintyPrediction> overconfident;
  std::vector<UncertaintyPrediction> underconfident;
  std::vector<double> ys;
  for (int i = 0; i < 100; ++i) {
    overconfident.push_back(pred(0.0, 1e-4));
    underconfident.push_back(pred(0.0, 1e9));
    ys.push_back(5.0 + i * 0.01);
  }
  CHECK(metrics::ece_regression(overconfident, ys, 9).ece == doctest::Approx(0.5));
  CHECK(metrics::ece_regression(underconfident, ys, 9).ece == doctest::Approx(0.5));
  CHECK_THROWS_AS((void)metrics::ece_regression({}, {}, 9), DomainError);
}

TEST_CASE("ece_regression of a calibrated generator is small") {
  Rng r(7, 0);
  std::vector<UncertaintyPrediction> preds;
  std::vector<double> ys;
  const std::size_t n = 20000;
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = r.uniform(-1, 1);
    const double sigma = 0.2 + 0.5 * r.uniform();
    preds.push_back(pred(mu, sigma));
    ys.push_back(mu + sigma * r.normal());
  }
  const auto cal = metrics::ece_regression(preds, ys, 9);
  CHECK(cal.ece < 0.02);
  CHECK(cal.max_gap < 0.05);
  CHECK(cal.expected.size() == 9);
}

TEST_CASE("ece_regression is permutation invariant and bounded") {
  Rng r(9, 0);
  std::vector<UncertaintyPrediction> preds;
  std::vector<double> ys;
  for (int i = 0; i < 500; ++i) {
    preds.push_back(pred(r.uniform(-1, 1), 0.1 + r.uniform()));
    ys.push_back(r.uniform(-2, 2));
  }
  const double base = metrics::ece_regression(preds, ys, 7).ece;
  CHECK(base >= 0.0);
  CHECK(base <= 1.0);
  // Reverse both lists together: same multiset of pairs.
  std::reverse(preds.begin(), preds.end());
  std::reverse(ys.begin(), ys.end());
  CHECK(metrics::ece_regression(preds, ys, 7).ece == doctest::Approx(base));
}

TEST_CASE("ece_classification small cases") {
  std::vector<double> conf = {0.9, 0.9};
  std::vector<bool> correct = {true, true};
  CHECK(metrics::ece_classification(conf, correct, 10) == doctest::Approx(0.1));

  // Confidence equals long-run accuracy in its bin -> zero error.
  std::vector<double> conf2;
  std::vector<bool> correct2;
  for (int i = 0; i < 10; ++i) {
    conf2.push_back(0.7);
    correct2.push_back(i < 7);
  }
  CHECK(metrics::ece_classification(conf2, correct2, 10) == doctest::Approx(0.0));

  CHECK_THROWS_AS((void)metrics::ece_classification(std::vector<double>{1.2},
                                                    std::vector<bool>{true}, 10),
                  DomainError);
}

TEST_CASE("ece_classification equals an explicit per-bin oracle") {
  Rng r(17, 0);
  std::vector<double> conf;
  std::vector<bool> correct;
  for (int i = 0; i < 20; ++i) {
    conf.push_back(r.uniform());
    correct.push_back(r.uniform() < conf.back());
  }
  const int bins = 5;
  // Independent re-implementation with an explicit bin loop.
  double oracle = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double lo = static_cast<double>(b) / bins;
    const double hi = static_cast<double>(b + 1) / bins;
    double sum_conf = 0.0;
    double sum_acc = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < conf.size(); ++i) {
      const bool in_bin = b + 1 == bins ? conf[i] >= lo && conf[i] <= hi
                                        : conf[i] >= lo && conf[i] < hi;
      if (!in_bin) continue;
      ++count;
      sum_conf += conf[i];
      sum_acc += correct[i] ? 1 : 0;
    }
    if (count == 0) continue;
    oracle += (static_cast<double>(count) / conf.size()) *
              std::abs(sum_acc / count - sum_conf / count);
  }
  CHECK(metrics::ece_classification(conf, correct, bins) == doctest::Approx(oracle));
}

TEST_CASE("etl analytic cases") {
  const std::vector<double> scores = {0.1, 0.5, 2.0, 4.0};
  CHECK(metrics::etl(scores, 0.75) == doctest::Approx(4.0));
  CHECK(metrics::etl(scores, 0.0) == doctest::Approx(1.65));
  CHECK_THROWS_AS((void)metrics::etl(scores, 1.0), DomainError);
  CHECK_THROWS_AS((void)metrics::etl(std::vector<double>{}, 0.5), DomainError);
}

TEST_CASE("etl equals the sort-based oracle and is monotone in alpha") {
  Rng r(23, 0);
  std::vector<double> scores;
  for (int i = 0; i < 1000; ++i) scores.push_back(r.normal());
  auto oracle = [&](double alpha) {
    auto sorted = scores;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * sorted.size()));
    return std::accumulate(sorted.begin(), sorted.begin() + k, 0.0) / k;
  };
  CHECK(metrics::etl(scores, 0.95) == oracle(0.95));
  CHECK(metrics::etl(scores, 0.5) == oracle(0.5));
  double prev = metrics::etl(scores, 0.0);
  for (double alpha : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
    const double v = metrics::etl(scores, alpha);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("etl of |r| for a perfect estimator stays under the gaussian tail bound") {
  // |r| is standard half-normal; the mean of its worst 5% is
  // 2 phi(z_{0.975}) / 0.05 ~= 2.338, comfortably below 2.5.
  Rng r(29, 0);
  std::vector<double> scores;
  const std::size_t n = 100000;
  scores.reserve(n);
  for (std::size_t i = 0; i < n; ++i) scores.push_back(std::abs(r.normal()));
  const double tail = metrics::etl(scores, 0.95);
  const double z = metrics::normal_quantile(0.975);
  const double oracle =
      2.0 * std::exp(-z * z / 2.0) / std::sqrt(2.0 * std::numbers::pi) / 0.05;
  CHECK(tail == doctest::Approx(oracle).epsilon(0.02));
  CHECK(tail <= 2.5);
}

TEST_CASE("local_wasserstein analytic and brute force") {
  std::vector<UncertaintyPrediction> preds = {pred(1, 2)};
  CHECK(metrics::local_wasserstein(preds, std::vector<double>{0},
                                   std::vector<double>{1}) == doctest::Approx(2.0));
  CHECK(metrics::local_wasserstein(preds, std::vector<double>{1},
                                   std::vector<double>{2}) == doctest::Approx(0.0));

  Rng r(31, 0);
  std::vector<UncertaintyPrediction> many;
  std::vector<double> gmu;
  std::vector<double> gsig;
  for (int i = 0; i < 100; ++i) {
    many.push_back(pred(r.normal(), 0.5 + r.uniform()));
    gmu.push_back(r.normal());
    gsig.push_back(0.5 + r.uniform());
  }
  double oracle = 0.0;
  for (int i = 0; i < 100; ++i) {
    oracle += (many[i].mu - gmu[i]) * (many[i].mu - gmu[i]) +
              (many[i].sigma_total - gsig[i]) * (many[i].sigma_total - gsig[i]);
  }
  CHECK(metrics::local_wasserstein(many, gmu, gsig) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("width_stats analytic cases and quantile oracle") {
  std::vector<UncertaintyPrediction> constant(10, pred(0, 1));
  auto stats = metrics::width_stats(constant);
  CHECK(stats.mean == doctest::Approx(1.0));
  CHECK(stats.variance == doctest::Approx(0.0));

  std::vector<UncertaintyPrediction> two = {pred(0, 1), pred(0, 3)};
  stats = metrics::width_stats(two);
  CHECK(stats.mean == doctest::Approx(2.0));
  CHECK(stats.variance == doctest::Approx(1.0));

  Rng r(37, 0);
  std::vector<UncertaintyPrediction> many;
  std::vector<double> sigmas;
  for (int i = 0; i < 1000; ++i) {
    const double s = 0.1 + r.uniform();
    many.push_back(pred(0, s));
    sigmas.push_back(s);
  }
  stats = metrics::width_stats(many);
  std::sort(sigmas.begin(), sigmas.end());
  for (const auto q : {0.05, 0.5, 0.95}) {
    const double h = (sigmas.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double expect = sigmas[lo] + (h - lo) * (sigmas[lo + 1] - sigmas[lo]);
    CHECK(stats.quantiles.at(q) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("nll asymmetry: shrinking sigma is punished ~k^2, growing ~log k") {
  const double mu = 0.0;
  const double y = 1.0;
  const double sigma = 1.0;
  const double base = nn::gaussian_nll_loss(mu, sigma, y);
  // Under-estimation: differences quadruple when k doubles.
  for (double k : {8.0, 16.0, 32.0}) {
    const double d1 = nn::gaussian_nll_loss(mu, sigma / k, y) - base;
    const double d2 = nn::gaussian_nll_loss(mu, sigma / (2 * k), y) - base;
    CHECK(d2 / d1 == doctest::Approx(4.0).epsilon(0.05));
  }
  // Over-estimation: doubling k adds ~ln 2.
  for (double k : {64.0, 256.0}) {
    const double d1 = nn::gaussian_nll_loss(mu, k * sigma, y) - base;
    const double d2 = nn::gaussian_nll_loss(mu, 2 * k * sigma, y) - base;
    CHECK(d2 - d1 == doctest::Approx(std::log(2.0)).epsilon(0.02));
  }
}

TEST_CASE("normal quantile matches the cdf") {
  for (double p : {0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.975, 0.999}) {
    CHECK(metrics::normal_cdf(metrics::normal_quantile(p)) ==
          doctest::Approx(p).epsilon(1e-9));
  }
  CHECK(metrics::normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(metrics::normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-5));
}

TEST_CASE("compute_metric dispatches and guards capabilities") {
  metrics::LabeledPredictions data;
  for (int i = 0; i < 10; ++i) {
    data.preds.push_back(pred(0.0, 1.0));
    data.ys.push_back(0.5);
  }
  metrics::MetricKind kind;
  kind.id = metrics::MetricId::Rmse;
  CHECK(metrics::compute_metric(kind, data) == doctest::Approx(0.5));
  kind.id = metrics::MetricId::LocalWasserstein;
  CHECK_THROWS_AS((void)metrics::compute_metric(kind, data), CapabilityError);
  kind.id = metrics::MetricId::Manual;
  CHECK_THROWS_AS((void)metrics::compute_metric(kind, data), CapabilityError);
}
