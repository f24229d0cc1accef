#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "uq/errors.hpp"
#include "uq/estimators.hpp"
#include "uq/nn.hpp"
#include "uq/rng.hpp"
#include "uq/synthdata.hpp"

namespace uq::testing {

// Closed-form estimator fixture: mu(x) and sigma(x) supplied as lambdas.
// Deterministic, decomposition-free unless components are provided.
class AnalyticEstimator : public Estimator {
public:
  using Fn = std::function<double(std::span<const double>)>;

  AnalyticEstimator(Fn mu, Fn sigma, int width = 1)
      : mu_(std::move(mu)), sigma_(std::move(sigma)), width_(width) {}

  UncertaintyPrediction predict(std::span<const double> x,
                                std::uint64_t) const override {
    if (x.size() != static_cast<std::size_t>(width_)) {
      throw ConfigError("analytic estimator width mismatch");
    }
    for (double v : x) {
      if (!std::isfinite(v)) throw DomainError("non-finite feature value");
    }
    UncertaintyPrediction p;
    p.mu = mu_(x);
    p.sigma_total = sigma_(x);
    p.sigma_aleatoric = p.sigma_total;
    p.sigma_epistemic = 0.0;
    return p;
  }

  int input_width() const override { return width_; }
  std::string name() const override { return "analytic"; }

private:
  Fn mu_;
  Fn sigma_;
  int width_;
};

// The canonical-task oracle: predicts the generating mean and noise exactly.
inline std::shared_ptr<AnalyticEstimator> canonical_oracle() {
  const auto g = synth::canonical_task();
  return std::make_shared<AnalyticEstimator>(
      [g](std::span<const double> x) { return g.mean_at(x); },
      [g](std::span<const double> x) { return g.noise_at(x); });
}

// A small random network for gradient and training probes.
inline nn::Mlp random_net(std::vector<int> widths, nn::Activation hidden,
                          nn::HeadKind head, std::uint64_t seed) {
  std::vector<nn::Activation> acts(widths.size() - 1, hidden);
  acts.back() = nn::Activation::Identity;
  std::vector<double> dropout(widths.size() - 2, 0.0);
  return nn::make_mlp(std::move(widths), std::move(acts), std::move(dropout),
                      head, seed);
}

// Gaussian-head net that outputs exactly (mu, sigma) for every input.
inline nn::Mlp constant_gaussian_net(double mu, double sigma, int width = 1) {
  nn::Mlp mlp;
  mlp.widths = {width, 2};
  mlp.activations = {nn::Activation::Identity};
  mlp.dropout = {};
  mlp.head = nn::HeadKind::Gaussian;
  mlp.weights = {std::vector<double>(2 * static_cast<std::size_t>(width), 0.0)};
  // Invert sigma = softplus(s) + floor.
  const double s = std::log(std::exp(sigma - mlp.sigma_floor) - 1.0);
  mlp.biases = {{mu, s}};
  mlp.validate();
  return mlp;
}

}  // namespace uq::testing
