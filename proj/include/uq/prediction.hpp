#pragma once

#include <cmath>
#include <optional>
#include <string>

namespace uq {

// A predictive mean with total standard deviation and, when the estimator
// can attribute it, the aleatoric/epistemic split. When both components are
// present they must recompose: sigma_total^2 = sigma_ale^2 + sigma_epi^2
// up to a 1e-9 relative slack.
struct UncertaintyPrediction {
  double mu = 0.0;
  double sigma_total = 0.0;
  std::optional<double> sigma_aleatoric;
  std::optional<double> sigma_epistemic;
};

// Returns a description of the first violated invariant, or nothing.
// Kept as a query (not a constructor check) so the technical test level can
// observe invalid predictions from faulty estimators instead of crashing.
std::optional<std::string> prediction_issue(const UncertaintyPrediction& p);

inline UncertaintyPrediction combine_components(double mu, double sigma_ale,
                                                double sigma_epi) {
  UncertaintyPrediction p;
  p.mu = mu;
  p.sigma_aleatoric = sigma_ale;
  p.sigma_epistemic = sigma_epi;
  p.sigma_total = std::sqrt(sigma_ale * sigma_ale + sigma_epi * sigma_epi);
  return p;
}

}  // namespace uq
