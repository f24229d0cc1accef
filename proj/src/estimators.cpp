#include "uq/estimators.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#include "uq/errors.hpp"
#include "uq/rng.hpp"

namespace uq {

namespace {

void ensure_emittable(const UncertaintyPrediction& p, const std::string& who) {
  if (auto issue = prediction_issue(p)) {
    throw EstimatorFault(who + " produced invalid prediction: " + *issue);
  }
}

struct Moments {
  double mean = 0.0;
  double pop_var = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  for (double v : xs) m.mean += v;
  m.mean /= static_cast<double>(xs.size());
  for (double v : xs) m.pop_var += (v - m.mean) * (v - m.mean);
  m.pop_var /= static_cast<double>(xs.size());
  return m;
}

}  // namespace

std::optional<std::string> prediction_issue(const UncertaintyPrediction& p) {
  if (!std::isfinite(p.mu)) return "non-finite mu";
  if (!std::isfinite(p.sigma_total)) return "non-finite sigma_total";
  if (p.sigma_total <= 0.0) return "sigma_total <= 0";
  if (p.sigma_aleatoric && (!std::isfinite(*p.sigma_aleatoric) ||
                            *p.sigma_aleatoric < 0.0)) {
    return "invalid sigma_aleatoric";
  }
  if (p.sigma_epistemic && (!std::isfinite(*p.sigma_epistemic) ||
                            *p.sigma_epistemic < 0.0)) {
    return "invalid sigma_epistemic";
  }
  if (p.sigma_aleatoric && p.sigma_epistemic) {
    const double lhs = p.sigma_total * p.sigma_total;
    const double rhs = *p.sigma_aleatoric * *p.sigma_aleatoric +
                       *p.sigma_epistemic * *p.sigma_epistemic;
    if (std::abs(lhs - rhs) > 1e-9 * lhs) {
      return "sigma decomposition inconsistent with total";
    }
  }
  return std::nullopt;
}

ParametricGaussian::ParametricGaussian(nn::Mlp model)
    : model_(std::move(model)) {
  model_.validate();
  if (model_.head != nn::HeadKind::Gaussian) {
    throw ConfigError("parametric_gaussian requires a gaussian-head model");
  }
}

UncertaintyPrediction ParametricGaussian::predict(std::span<const double> x,
                                                  std::uint64_t) const {
  const auto out = nn::forward_gaussian(model_, x);
  auto p = combine_components(out.mu, out.sigma, 0.0);
  ensure_emittable(p, name());
  return p;
}

McDropout::McDropout(nn::Mlp model, double rate, int samples)
    : model_(std::move(model)), samples_(samples) {
  if (samples_ < 2) throw ConfigError("mc_dropout requires T >= 2 samples");
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
  for (auto& r : model_.dropout) r = rate;
  model_.validate();
}

UncertaintyPrediction McDropout::predict(std::span<const double> x,
                                         std::uint64_t seed) const {
  std::vector<double> mus;
  mus.reserve(static_cast<std::size_t>(samples_));
  double mean_var_ale = 0.0;
  const bool gaussian = model_.head == nn::HeadKind::Gaussian;
  for (int t = 0; t < samples_; ++t) {
    nn::ForwardMode mode{true, rng::derive(seed, static_cast<std::uint64_t>(t))};
    if (gaussian) {
      const auto out = nn::forward_gaussian(model_, x, mode);
      mus.push_back(out.mu);
      mean_var_ale += out.sigma * out.sigma;
    } else {
      mus.push_back(nn::forward_point(model_, x, mode));
    }
  }
  mean_var_ale /= static_cast<double>(samples_);
  const auto m = moments(mus);
  UncertaintyPrediction p;
  if (gaussian) {
    p = combine_components(m.mean, std::sqrt(mean_var_ale), std::sqrt(m.pop_var));
  } else {
    p.mu = m.mean;
    p.sigma_total = std::sqrt(m.pop_var);
    p.sigma_epistemic = std::sqrt(m.pop_var);
  }
  ensure_emittable(p, name());
  return p;
}

DeepEnsemble::DeepEnsemble(std::vector<nn::Mlp> members)
    : members_(std::move(members)) {
  if (members_.size() < 2) throw ConfigError("deep_ensemble requires M >= 2 members");
  for (const auto& m : members_) {
    m.validate();
    if (m.head != nn::HeadKind::Gaussian) {
      throw ConfigError("deep_ensemble members must have gaussian heads");
    }
    if (m.input_width() != members_.front().input_width()) {
      throw ConfigError("deep_ensemble members disagree on input width");
    }
  }
}

double DeepEnsemble::sigma_floor() const {
  double floor = members_.front().sigma_floor;
  for (const auto& m : members_) floor = std::min(floor, m.sigma_floor);
  return floor;
}

UncertaintyPrediction DeepEnsemble::predict(std::span<const double> x,
                                            std::uint64_t) const {
  std::vector<double> mus;
  mus.reserve(members_.size());
  double mean_var_ale = 0.0;
  for (const auto& member : members_) {
    const auto out = nn::forward_gaussian(member, x);
    if (!std::isfinite(out.mu) || !std::isfinite(out.sigma)) {
      throw EstimatorFault("ensemble member produced non-finite output");
    }
    mus.push_back(out.mu);
    mean_var_ale += out.sigma * out.sigma;
  }
  mean_var_ale /= static_cast<double>(members_.size());
  const auto m = moments(mus);
  auto p = combine_components(m.mean, std::sqrt(mean_var_ale), std::sqrt(m.pop_var));
  ensure_emittable(p, name());
  return p;
}

Scaled::Scaled(EstimatorPtr inner, double scale)
    : inner_(std::move(inner)), scale_(scale) {
  if (!inner_) throw ConfigError("scaled estimator requires an inner estimator");
  if (!(scale_ > 0.0)) throw ConfigError("scale factor must be > 0");
}

UncertaintyPrediction Scaled::predict(std::span<const double> x,
                                      std::uint64_t seed) const {
  auto p = inner_->predict(x, seed);
  p.sigma_total *= scale_;
  if (p.sigma_aleatoric) *p.sigma_aleatoric *= scale_;
  if (p.sigma_epistemic) *p.sigma_epistemic *= scale_;
  ensure_emittable(p, name());
  return p;
}

BypassBlackBox::BypassBlackBox(OpaqueFn model, int input_width, double margin)
    : model_(std::move(model)), width_(input_width), margin_(margin) {
  if (!model_) throw ConfigError("bypass requires an opaque model function");
  if (width_ <= 0) throw ConfigError("bypass input width must be positive");
  if (margin_ < 0.0) throw ConfigError("bypass margin must be >= 0");
}

double BypassBlackBox::run_opaque(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(width_)) {
    throw ConfigError("bypass input width mismatch");
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw DomainError("non-finite feature value");
  }
  return model_(x);
}

UncertaintyPrediction BypassBlackBox::predict(std::span<const double> x,
                                              std::uint64_t) const {
  UncertaintyPrediction p;
  p.mu = run_opaque(x);
  p.sigma_total = margin_;  // no incoming uncertainty outside a chain
  ensure_emittable(p, name());
  return p;
}

FaultInjected::FaultInjected(EstimatorPtr inner, Fault fault)
    : inner_(std::move(inner)), fault_(fault) {
  if (!inner_) throw ConfigError("fault injection requires an inner estimator");
}

FaultInjected::Fault FaultInjected::fault_from_string(const std::string& s) {
  if (s == "negative_sigma") return Fault::NegativeSigma;
  if (s == "nan_output") return Fault::NanOutput;
  if (s == "unseeded") return Fault::Unseeded;
  if (s == "swallow_invalid_input") return Fault::SwallowInvalidInput;
  throw ConfigError("unknown fault kind: " + s);
}

UncertaintyPrediction FaultInjected::predict(std::span<const double> x,
                                             std::uint64_t seed) const {
  static std::atomic<std::uint64_t> call_counter{0};
  switch (fault_) {
    case Fault::NegativeSigma: {
      auto p = inner_->predict(x, seed);
      p.sigma_total = -1.0;
      p.sigma_aleatoric.reset();
      p.sigma_epistemic.reset();
      return p;
    }
    case Fault::NanOutput: {
      auto p = inner_->predict(x, seed);
      p.mu = std::numeric_limits<double>::quiet_NaN();
      return p;
    }
    case Fault::Unseeded: {
      auto p = inner_->predict(x, seed);
      p.mu += 1e-6 * static_cast<double>(call_counter.fetch_add(1) % 1000 + 1);
      return p;
    }
    case Fault::SwallowInvalidInput: {
      try {
        return inner_->predict(x, seed);
      } catch (const Error&) {
        // The defect under test: invalid input quietly becomes a number.
        UncertaintyPrediction p;
        p.mu = 0.0;
        p.sigma_total = 1.0;
        return p;
      }
    }
  }
  return inner_->predict(x, seed);
}

std::vector<UncertaintyPrediction> evaluate_dataset(const Estimator& est,
                                                    const Dataset& data,
                                                    std::uint64_t seed) {
  std::vector<UncertaintyPrediction> preds;
  preds.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    preds.push_back(est.predict(data.rows[i].x, rng::derive(seed, i)));
  }
  return preds;
}

std::pair<std::shared_ptr<Scaled>, double> fit_scale(EstimatorPtr est,
                                                     const Dataset& calib,
                                                     std::uint64_t seed) {
  if (!est) throw ConfigError("fit_scale requires an estimator");
  if (calib.empty()) throw ConfigError("fit_scale requires a non-empty calibration set");
  const auto preds = evaluate_dataset(*est, calib, seed);
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double r = (calib.rows[i].y - preds[i].mu) / preds[i].sigma_total;
    mean_sq += r * r;
  }
  mean_sq /= static_cast<double>(preds.size());
  if (!(mean_sq > 0.0)) {
    throw DomainError("fit_scale: residuals identically zero, no finite scale");
  }
  const double s = std::sqrt(mean_sq);
  return {std::make_shared<Scaled>(std::move(est), s), s};
}

std::pair<double, double> decompose(const UncertaintyPrediction& p) {
  if (!p.sigma_aleatoric || !p.sigma_epistemic) {
    throw CapabilityError("estimator cannot attribute uncertainty: decomposition missing");
  }
  if (auto issue = prediction_issue(p)) {
    throw StateError("decompose on invalid prediction: " + *issue);
  }
  return {*p.sigma_aleatoric, *p.sigma_epistemic};
}

UncertaintyPrediction ChainOutput::as_prediction() const {
  if (!sigma_total) {
    throw CapabilityError("chain emitted no sigma (internal final stage)");
  }
  UncertaintyPrediction p;
  p.mu = mu;
  p.sigma_total = *sigma_total;
  p.sigma_aleatoric = sigma_aleatoric;
  p.sigma_epistemic = sigma_epistemic;
  return p;
}

ChainOutput propagate_chain(const std::vector<ChainStage>& chain,
                            std::span<const double> x, double sigma_in,
                            int samples, std::uint64_t seed) {
  if (chain.empty()) throw ConfigError("chain must have at least one stage");
  if (sigma_in < 0.0) throw DomainError("incoming sigma must be >= 0");
  if (sigma_in > 0.0 && samples < 2) {
    throw ConfigError("chain propagation with sigma_in > 0 requires S >= 2");
  }

  std::vector<double> signal(x.begin(), x.end());
  double incoming = sigma_in;
  ChainOutput out;

  for (std::size_t k = 0; k < chain.size(); ++k) {
    const auto& stage = chain[k];
    const std::uint64_t stage_seed = rng::derive(seed, k);
    out.sigma_aleatoric.reset();
    out.sigma_epistemic.reset();

    if (stage.bypass) {
      out.mu = stage.bypass->run_opaque(signal);
      out.sigma_total = incoming + stage.bypass->margin();
    } else {
      if (!stage.estimator) throw ConfigError("chain stage has no estimator");
      if (incoming == 0.0) {
        const auto p = stage.estimator->predict(signal, stage_seed);
        out.mu = p.mu;
        out.sigma_total = p.sigma_total;
        out.sigma_aleatoric = p.sigma_aleatoric;
        out.sigma_epistemic = p.sigma_epistemic;
      } else {
        Rng noise(stage_seed, 0xca11ULL);
        std::vector<double> mus(static_cast<std::size_t>(samples));
        double mean_var = 0.0;
        std::vector<double> sample_x(signal.size());
        for (int s = 0; s < samples; ++s) {
          for (std::size_t d = 0; d < signal.size(); ++d) {
            sample_x[d] = signal[d] + incoming * noise.normal();
          }
          const auto p = stage.estimator->predict(
              sample_x, rng::derive(stage_seed, 1000 + static_cast<std::uint64_t>(s)));
          mus[static_cast<std::size_t>(s)] = p.mu;
          mean_var += p.sigma_total * p.sigma_total;
        }
        mean_var /= static_cast<double>(samples);
        const auto m = moments(mus);
        out.mu = m.mean;
        out.sigma_total = std::sqrt(mean_var + m.pop_var);
      }
    }

    if (stage.internal) {
      out.sigma_total.reset();
      out.sigma_aleatoric.reset();
      out.sigma_epistemic.reset();
    }
    incoming = out.sigma_total.value_or(0.0);
    signal.assign(1, out.mu);
  }
  return out;
}

}  // namespace uq
