#include "uq/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "uq/errors.hpp"
#include "uq/nn.hpp"

namespace uq::metrics {

std::string to_string(ScoreKind k) {
  return k == ScoreKind::Nll ? "nll" : "abs_normalized_residual";
}

ScoreKind score_from_string(const std::string& s) {
  if (s == "nll") return ScoreKind::Nll;
  if (s == "abs_normalized_residual") return ScoreKind::AbsNormalizedResidual;
  throw ConfigError("unknown score kind: " + s);
}

double normalized_residual(const UncertaintyPrediction& p, double y) {
  if (!(p.sigma_total > 0.0)) {
    throw DomainError("normalized residual requires sigma_total > 0");
  }
  return (y - p.mu) / p.sigma_total;
}

double point_score(ScoreKind kind, const UncertaintyPrediction& p, double y) {
  switch (kind) {
    case ScoreKind::Nll: return nn::gaussian_nll_loss(p.mu, p.sigma_total, y);
    case ScoreKind::AbsNormalizedResidual:
      return std::abs(normalized_residual(p, y));
  }
  return 0.0;
}

std::vector<PointScore> point_scores(ScoreKind kind,
                                     std::span<const UncertaintyPrediction> preds,
                                     std::span<const double> ys) {
  if (preds.size() != ys.size()) throw DomainError("preds/targets length mismatch");
  std::vector<PointScore> out;
  out.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    out.push_back({kind, point_score(kind, preds[i], ys[i]), i});
  }
  return out;
}

double nll_mean(std::span<const UncertaintyPrediction> preds,
                std::span<const double> ys) {
  if (preds.empty()) throw DomainError("nll_mean of empty input");
  if (preds.size() != ys.size()) throw DomainError("preds/targets length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    acc += nn::gaussian_nll_loss(preds[i].mu, preds[i].sigma_total, ys[i]);
  }
  return acc / static_cast<double>(preds.size());
}

double rmse(std::span<const UncertaintyPrediction> preds,
            std::span<const double> ys) {
  if (preds.empty()) throw DomainError("rmse of empty input");
  if (preds.size() != ys.size()) throw DomainError("preds/targets length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i].mu - ys[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(preds.size()));
}

namespace {

// Acklam's rational approximation with one Halley refinement; accurate to
// machine precision for practical purposes.
double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal quantile needs p in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * std::acos(-1.0)) * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

}  // namespace

double normal_quantile(double p) { return inverse_normal_cdf(p); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

RegressionCalibration ece_regression(std::span<const UncertaintyPrediction> preds,
                                     std::span<const double> ys, int levels) {
  if (preds.empty()) throw DomainError("ece_regression of empty input");
  if (preds.size() != ys.size()) throw DomainError("preds/targets length mismatch");
  if (levels < 2) throw DomainError("ece_regression needs levels >= 2");

  RegressionCalibration cal;
  cal.expected.reserve(static_cast<std::size_t>(levels));
  cal.observed.reserve(static_cast<std::size_t>(levels));
  const double n = static_cast<double>(preds.size());
  for (int j = 1; j <= levels; ++j) {
    const double p = static_cast<double>(j) / (levels + 1);
    const double z = normal_quantile((1.0 + p) / 2.0);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (std::abs(ys[i] - preds[i].mu) <= z * preds[i].sigma_total) ++covered;
    }
    const double c = static_cast<double>(covered) / n;
    cal.expected.push_back(p);
    cal.observed.push_back(c);
    const double gap = std::abs(c - p);
    cal.ece += gap;
    cal.max_gap = std::max(cal.max_gap, gap);
  }
  cal.ece /= static_cast<double>(levels);
  return cal;
}

double ece_classification(std::span<const double> confidences,
                          const std::vector<bool>& correct, int bins) {
  if (confidences.empty()) throw DomainError("ece_classification of empty input");
  if (confidences.size() != correct.size()) {
    throw DomainError("confidence/correctness length mismatch");
  }
  if (bins < 2) throw DomainError("ece_classification needs bins >= 2");
  for (double c : confidences) {
    if (!(c >= 0.0 && c <= 1.0)) throw DomainError("confidence outside [0,1]");
  }
  std::vector<double> sum_conf(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> sum_acc(static_cast<std::size_t>(bins), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    auto b = static_cast<std::size_t>(confidences[i] * bins);
    if (b >= static_cast<std::size_t>(bins)) b = static_cast<std::size_t>(bins) - 1;
    sum_conf[b] += confidences[i];
    sum_acc[b] += correct[i] ? 1.0 : 0.0;
    ++count[b];
  }
  double ece = 0.0;
  const double n = static_cast<double>(confidences.size());
  for (std::size_t b = 0; b < static_cast<std::size_t>(bins); ++b) {
    if (count[b] == 0) continue;
    const double nb = static_cast<double>(count[b]);
    ece += (nb / n) * std::abs(sum_acc[b] / nb - sum_conf[b] / nb);
  }
  return ece;
}

double etl(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw DomainError("etl of empty scores");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw DomainError("etl needs alpha in [0,1)");
  const auto n = scores.size();
  const auto k = static_cast<std::size_t>(
      std::ceil((1.0 - alpha) * static_cast<double>(n)));
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) acc += sorted[i];
  return acc / static_cast<double>(k);
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw DomainError("quantile of empty values");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile needs q in [0,1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - std::floor(h);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double local_wasserstein(std::span<const UncertaintyPrediction> preds,
                         std::span<const double> gt_means,
                         std::span<const double> gt_sigmas) {
  if (preds.size() != gt_means.size() || preds.size() != gt_sigmas.size()) {
    throw DomainError("local_wasserstein requires aligned lists");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double dm = preds[i].mu - gt_means[i];
    const double ds = preds[i].sigma_total - gt_sigmas[i];
    acc += dm * dm + ds * ds;
  }
  return acc;
}

std::string to_string(MetricId id) {
  switch (id) {
    case MetricId::NllMean: return "nll_mean";
    case MetricId::EceRegression: return "ece_regression";
    case MetricId::EceClassification: return "ece_classification";
    case MetricId::Etl: return "etl";
    case MetricId::Quantile: return "quantile";
    case MetricId::LocalWasserstein: return "local_wasserstein";
    case MetricId::Rmse: return "rmse";
    case MetricId::WidthStats: return "width_stats";
    case MetricId::Manual: return "manual";
  }
  return "nll_mean";
}

MetricId metric_id_from_string(const std::string& s) {
  if (s == "nll_mean") return MetricId::NllMean;
  if (s == "ece_regression") return MetricId::EceRegression;
  if (s == "ece_classification") return MetricId::EceClassification;
  if (s == "etl") return MetricId::Etl;
  if (s == "quantile") return MetricId::Quantile;
  if (s == "local_wasserstein") return MetricId::LocalWasserstein;
  if (s == "rmse") return MetricId::Rmse;
  if (s == "width_stats") return MetricId::WidthStats;
  if (s == "manual") return MetricId::Manual;
  throw ConfigError("unknown measure: " + s);
}

void MetricKind::validate() const {
  if (levels < 2) throw ConfigError("ece_regression levels must be >= 2");
  if (bins < 2) throw ConfigError("ece_classification bins must be >= 2");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("etl alpha must be in [0,1)");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile q must be in [0,1]");
  if (id == MetricId::WidthStats && width_stat != "mean" &&
      width_stat != "variance" && width_stat != "q50" && width_stat != "q95") {
    throw ConfigError("width_stats stat must be mean|variance|q50|q95");
  }
}

std::string MetricKind::describe() const {
  switch (id) {
    case MetricId::EceRegression:
      return "ece_regression(" + std::to_string(levels) + ")";
    case MetricId::EceClassification:
      return "ece_classification(" + std::to_string(bins) + ")";
    case MetricId::Etl:
      return "etl(" + std::to_string(alpha) + "," + to_string(score) + ")";
    case MetricId::Quantile:
      return "quantile(" + std::to_string(q) + "," + to_string(score) + ")";
    case MetricId::WidthStats:
      return "width_stats(" + width_stat + ")";
    default:
      return to_string(id);
  }
}

double compute_metric(const MetricKind& kind, const LabeledPredictions& data) {
  kind.validate();
  if (data.preds.empty()) throw DomainError("metric over empty prediction set");
  switch (kind.id) {
    case MetricId::NllMean:
      return nll_mean(data.preds, data.ys);
    case MetricId::EceRegression:
      return ece_regression(data.preds, data.ys, kind.levels).ece;
    case MetricId::Rmse:
      return rmse(data.preds, data.ys);
    case MetricId::Etl:
    case MetricId::Quantile: {
      const auto scores = point_scores(kind.score, data.preds, data.ys);
      std::vector<double> values;
      values.reserve(scores.size());
      for (const auto& s : scores) values.push_back(s.value);
      return kind.id == MetricId::Etl ? etl(values, kind.alpha)
                                      : quantile(values, kind.q);
    }
    case MetricId::LocalWasserstein: {
      if (data.mu_gt.size() != data.preds.size() ||
          data.sigma_gt.size() != data.preds.size()) {
        throw CapabilityError(
            "local_wasserstein requires ground-truth means and sigmas on "
            "every row");
      }
      return local_wasserstein(data.preds, data.mu_gt, data.sigma_gt);
    }
    case MetricId::WidthStats: {
      const auto stats = width_stats(data.preds);
      if (kind.width_stat == "mean") return stats.mean;
      if (kind.width_stat == "variance") return stats.variance;
      if (kind.width_stat == "q50") return stats.quantiles.at(0.5);
      return stats.quantiles.at(0.95);
    }
    case MetricId::EceClassification:
      throw CapabilityError(
          "ece_classification needs probability arrays, not regression "
          "predictions");
    case MetricId::Manual:
      throw CapabilityError("manual measures are asserted, not computed");
  }
  throw ConfigError("unhandled metric kind");
}

WidthStats width_stats(std::span<const UncertaintyPrediction> preds) {
  if (preds.empty()) throw DomainError("width_stats of empty input");
  std::vector<double> sigmas;
  sigmas.reserve(preds.size());
  for (const auto& p : preds) sigmas.push_back(p.sigma_total);
  WidthStats stats;
  for (double s : sigmas) stats.mean += s;
  stats.mean /= static_cast<double>(sigmas.size());
  for (double s : sigmas) stats.variance += (s - stats.mean) * (s - stats.mean);
  stats.variance /= static_cast<double>(sigmas.size());
  for (double q : {0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0}) {
    stats.quantiles[q] = quantile(sigmas, q);
  }
  return stats;
}

}  // namespace uq::metrics
