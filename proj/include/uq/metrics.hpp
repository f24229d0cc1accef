#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "uq/prediction.hpp"

namespace uq::metrics {

enum class ScoreKind { Nll, AbsNormalizedResidual };

std::string to_string(ScoreKind k);
ScoreKind score_from_string(const std::string& s);

struct PointScore {
  ScoreKind kind = ScoreKind::AbsNormalizedResidual;
  double value = 0.0;
  std::size_t index = 0;  // row index in the scored dataset
};

// (y - mu) / sigma_total.
double normalized_residual(const UncertaintyPrediction& p, double y);

// Point-wise score; higher = worse for both kinds.
double point_score(ScoreKind kind, const UncertaintyPrediction& p, double y);
std::vector<PointScore> point_scores(ScoreKind kind,
                                     std::span<const UncertaintyPrediction> preds,
                                     std::span<const double> ys);

// Mean gaussian NLL of predictions against targets.
double nll_mean(std::span<const UncertaintyPrediction> preds,
                std::span<const double> ys);

double rmse(std::span<const UncertaintyPrediction> preds,
            std::span<const double> ys);

// Coverage-curve calibration error for regression. For expected coverages
// p_j = j/(L+1) the empirical coverage c_j of the central gaussian interval
// mu +- z_{(1+p_j)/2} sigma is measured; the result averages |c_j - p_j|.
struct RegressionCalibration {
  double ece = 0.0;       // mean absolute coverage gap
  double max_gap = 0.0;   // worst per-level gap, reported alongside
  std::vector<double> expected;   // p_j
  std::vector<double> observed;   // c_j
};
RegressionCalibration ece_regression(std::span<const UncertaintyPrediction> preds,
                                     std::span<const double> ys, int levels);

// Classic binned ECE over confidence/correctness pairs; equal-width bins on
// [0,1], empty bins contribute nothing.
double ece_classification(std::span<const double> confidences,
                          const std::vector<bool>& correct, int bins);

// Mean of the k = ceil((1-alpha) * n) largest scores.
double etl(std::span<const double> scores, double alpha);

// Type-7 (linear interpolation) quantile; q in [0,1].
double quantile(std::span<const double> values, double q);

// Sum over points of (mu - mu_gt)^2 + (sigma - sigma_gt)^2.
double local_wasserstein(std::span<const UncertaintyPrediction> preds,
                         std::span<const double> gt_means,
                         std::span<const double> gt_sigmas);

struct WidthStats {
  double mean = 0.0;
  double variance = 0.0;  // population
  std::map<double, double> quantiles;  // q -> sigma quantile
};
WidthStats width_stats(std::span<const UncertaintyPrediction> preds);

// Standard normal quantile (inverse CDF); p in (0,1).
double normal_quantile(double p);
double normal_cdf(double z);

enum class MetricId {
  NllMean,
  EceRegression,
  EceClassification,
  Etl,
  Quantile,
  LocalWasserstein,
  Rmse,
  WidthStats,
  Manual,  // asserted by configuration, never computed
};

std::string to_string(MetricId id);
MetricId metric_id_from_string(const std::string& s);

// A fully parameterized measure, as it appears in criteria and test cases.
struct MetricKind {
  MetricId id = MetricId::NllMean;
  int levels = 9;    // ece_regression coverage levels
  int bins = 10;     // ece_classification bins
  double alpha = 0.9;  // etl tail start
  double q = 0.5;      // quantile
  ScoreKind score = ScoreKind::AbsNormalizedResidual;  // etl / quantile basis
  std::string width_stat = "mean";  // width_stats scalar: mean | variance | q50 ...

  void validate() const;
  std::string describe() const;
};

// Predictions joined with everything the measures may need.
struct LabeledPredictions {
  std::vector<UncertaintyPrediction> preds;
  std::vector<double> ys;
  std::vector<double> mu_gt;      // empty when unavailable
  std::vector<double> sigma_gt;   // empty when unavailable
};

// Scalar value of the measure over a labeled set. Classification ECE and
// manual measures are not computable on this route -> CapabilityError.
double compute_metric(const MetricKind& kind, const LabeledPredictions& data);

}  // namespace uq::metrics
