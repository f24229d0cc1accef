#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uq/dataset.hpp"
#include "uq/nn.hpp"
#include "uq/prediction.hpp"

namespace uq {

// Common interface over the uncertainty mechanism families. Estimators are
// immutable after construction; predict is reentrant and, given a seed,
// deterministic, so concurrent evaluation is order-independent.
class Estimator {
public:
  virtual ~Estimator() = default;

  virtual UncertaintyPrediction predict(std::span<const double> x,
                                        std::uint64_t seed) const = 0;
  virtual int input_width() const = 0;
  // Smallest sigma_total this estimator can emit (0 when unbounded below).
  virtual double sigma_floor() const { return 0.0; }
  virtual std::string name() const = 0;

  UncertaintyPrediction predict(const std::vector<double>& x,
                                std::uint64_t seed) const {
    return predict(std::span<const double>(x.data(), x.size()), seed);
  }
};

using EstimatorPtr = std::shared_ptr<const Estimator>;

// Gaussian-head network read directly: sigma_ale = sigma head output,
// sigma_epi = 0.
class ParametricGaussian : public Estimator {
public:
  explicit ParametricGaussian(nn::Mlp model);
  UncertaintyPrediction predict(std::span<const double> x,
                                std::uint64_t seed) const override;
  int input_width() const override { return model_.input_width(); }
  double sigma_floor() const override { return model_.sigma_floor; }
  std::string name() const override { return "parametric_gaussian"; }
  const nn::Mlp& model() const { return model_; }

private:
  nn::Mlp model_;
};

// T stochastic forward passes with dropout kept on. Epistemic spread is the
// population std of the per-pass means; with a gaussian head the aleatoric
// part is sqrt(mean per-pass sigma^2).
class McDropout : public Estimator {
public:
  McDropout(nn::Mlp model, double rate, int samples);
  UncertaintyPrediction predict(std::span<const double> x,
                                std::uint64_t seed) const override;
  int input_width() const override { return model_.input_width(); }
  double sigma_floor() const override {
    return model_.head == nn::HeadKind::Gaussian ? model_.sigma_floor : 0.0;
  }
  std::string name() const override { return "mc_dropout"; }
  int samples() const { return samples_; }

private:
  nn::Mlp model_;
  int samples_;
};

// M >= 2 gaussian-head members. mu = mean of member means, sigma_ale^2 =
// mean member sigma^2, sigma_epi^2 = population variance of member means
// (the mixture-moment identity).
class DeepEnsemble : public Estimator {
public:
  explicit DeepEnsemble(std::vector<nn::Mlp> members);
  UncertaintyPrediction predict(std::span<const double> x,
                                std::uint64_t seed) const override;
  int input_width() const override { return members_.front().input_width(); }
  double sigma_floor() const override;
  std::string name() const override { return "deep_ensemble"; }
  std::size_t member_count() const { return members_.size(); }

private:
  std::vector<nn::Mlp> members_;
};

// Post-hoc recalibration: all sigma components of the inner prediction
// multiplied by a fitted factor s > 0.
class Scaled : public Estimator {
public:
  Scaled(EstimatorPtr inner, double scale);
  UncertaintyPrediction predict(std::span<const double> x,
                                std::uint64_t seed) const override;
  int input_width() const override { return inner_->input_width(); }
  double sigma_floor() const override { return inner_->sigma_floor() * scale_; }
  std::string name() const override { return "scaled(" + inner_->name() + ")"; }
  double scale() const { return scale_; }
  const EstimatorPtr& inner() const { return inner_; }

private:
  EstimatorPtr inner_;
  double scale_;
};

// Black-box stage that cannot estimate: routes upstream uncertainty around
// the opaque model, optionally adding a conservative margin. Standalone
// predict emits sigma_total = margin with no decomposition.
class BypassBlackBox : public Estimator {
public:
  using OpaqueFn = std::function<double(std::span<const double>)>;
  BypassBlackBox(OpaqueFn model, int input_width, double margin);
  UncertaintyPrediction predict(std::span<const double> x,
                                std::uint64_t seed) const override;
  int input_width() const override { return width_; }
  std::string name() const override { return "bypass_black_box"; }
  double margin() const { return margin_; }
  double run_opaque(std::span<const double> x) const;

private:
  OpaqueFn model_;
  int width_;
  double margin_;
};

// Test fixture: wraps an estimator and corrupts its behavior in a chosen
// way so the technical test level has something to catch.
class FaultInjected : public Estimator {
public:
  enum class Fault { NegativeSigma, NanOutput, Unseeded, SwallowInvalidInput };
  FaultInjected(EstimatorPtr inner, Fault fault);
  UncertaintyPrediction predict(std::span<const double> x,
                                std::uint64_t seed) const override;
  int input_width() const override { return inner_->input_width(); }
  std::string name() const override { return "fault(" + inner_->name() + ")"; }

  static Fault fault_from_string(const std::string& s);

private:
  EstimatorPtr inner_;
  Fault fault_;
};

// Per-row prediction over a dataset; row i uses seed derive(seed, i).
std::vector<UncertaintyPrediction> evaluate_dataset(const Estimator& est,
                                                    const Dataset& data,
                                                    std::uint64_t seed);

// Closed-form global sigma multiplier: s = sqrt(mean((y - mu)^2 / sigma^2))
// over the calibration set, the NLL minimizer for a shared multiplier.
// Returns the wrapped estimator and the fitted s.
std::pair<std::shared_ptr<Scaled>, double> fit_scale(EstimatorPtr est,
                                                     const Dataset& calib,
                                                     std::uint64_t seed);

// Stored (aleatoric, epistemic) pair; re-checks the recomposition invariant.
// Missing components -> CapabilityError, violated invariant -> StateError.
std::pair<double, double> decompose(const UncertaintyPrediction& p);

// One stage of an uncertainty-information chain. Non-bypass stages sample
// around incoming (mu, sigma) and recombine with the ensemble rule; bypass
// stages run the opaque model once and add their margin to sigma. A stage
// flagged internal consumes incoming sigma but emits none.
struct ChainStage {
  EstimatorPtr estimator;  // null for bypass stages
  std::shared_ptr<const BypassBlackBox> bypass;
  bool internal = false;
};

struct ChainOutput {
  double mu = 0.0;
  std::optional<double> sigma_total;
  std::optional<double> sigma_aleatoric;
  std::optional<double> sigma_epistemic;

  // Throws CapabilityError when the chain suppressed its output sigma.
  UncertaintyPrediction as_prediction() const;
};

ChainOutput propagate_chain(const std::vector<ChainStage>& chain,
                            std::span<const double> x, double sigma_in,
                            int samples, std::uint64_t seed);

}  // namespace uq
