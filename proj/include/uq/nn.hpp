#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uq/dataset.hpp"

namespace uq::nn {

enum class Activation { Identity, Relu, Tanh };
enum class HeadKind { Point, Gaussian };
enum class LossKind { Mse, GaussianNll };
enum class OptimizerKind { Sgd, Adam };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);
std::string to_string(HeadKind h);
HeadKind head_from_string(const std::string& s);

// Minimal fully connected network. A gaussian head requires the last layer
// to output exactly two values, (mu, raw scale s); sigma = softplus(s) +
// sigma_floor, so every emitted sigma is >= sigma_floor > 0.
struct Mlp {
  std::vector<int> widths;                  // incl. input, e.g. {1, 16, 16, 2}
  std::vector<Activation> activations;      // one per non-input layer
  std::vector<double> dropout;              // one per hidden layer, in [0, 1)
  HeadKind head = HeadKind::Point;
  double sigma_floor = 1e-4;
  std::vector<std::vector<double>> weights; // weights[l], row-major out x in
  std::vector<std::vector<double>> biases;  // biases[l]

  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
  std::size_t layer_count() const { return widths.size() - 1; }
  std::size_t parameter_count() const;

  // Dimension and range checks; throws ConfigError.
  void validate() const;
  // Throws StateError if any weight or bias is non-finite.
  void check_finite() const;

  double& param(std::size_t flat_index);
  double param(std::size_t flat_index) const;
};

// Uniform +-sqrt(6 / (fan_in + fan_out)) initialization from the seed.
Mlp make_mlp(std::vector<int> widths, std::vector<Activation> activations,
             std::vector<double> dropout, HeadKind head, std::uint64_t seed,
             double sigma_floor = 1e-4);

struct ForwardMode {
  bool stochastic = false;     // sample dropout masks
  std::uint64_t seed = 0;      // required when stochastic
};

// Raw network outputs. Deterministic mode is a pure function of (mlp, x);
// stochastic mode additionally of the seed. Inverted dropout keeps the
// deterministic pass equal to the mask expectation.
std::vector<double> forward(const Mlp& mlp, std::span<const double> x,
                            const ForwardMode& mode = {});

struct GaussianOut {
  double mu = 0.0;
  double sigma = 0.0;
};

// Gaussian-head convenience: maps (mu, s) -> (mu, softplus(s) + floor).
GaussianOut forward_gaussian(const Mlp& mlp, std::span<const double> x,
                             const ForwardMode& mode = {});
// Point-head convenience: first output.
double forward_point(const Mlp& mlp, std::span<const double> x,
                     const ForwardMode& mode = {});

double softplus(double s);

// ln(sigma) + (y - mu)^2 / (2 sigma^2) + 0.5 ln(2 pi); sigma <= 0 -> DomainError.
double gaussian_nll_loss(double mu, double sigma, double y);

struct TrainConfig {
  double learning_rate = 1e-2;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::Mse;
  OptimizerKind optimizer = OptimizerKind::Adam;
  // Adam defaults; fixed unless a study needs otherwise.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

struct TrainTrace {
  std::vector<double> epoch_loss;  // mean loss per epoch, length == epochs
};

// In-place training; mini-batch order is drawn from a counter RNG keyed by
// (seed, epoch) so results do not depend on prior RNG usage. NaN loss ->
// TrainingDiverged naming the epoch. Bit-reproducible for fixed (cfg, data).
TrainTrace train(Mlp& mlp, const Dataset& data, const TrainConfig& cfg);

// Max relative error between analytic and central finite-difference
// gradients over all parameters (h = 1e-5, denominator max(|g|, 1e-8)).
double grad_check(const Mlp& mlp, std::span<const double> x, double y,
                  LossKind loss);

// Versioned JSON checkpoint (widths, activations, dropout, head,
// sigma_floor, flat weight/bias arrays).
std::string to_checkpoint_json(const Mlp& mlp);
Mlp from_checkpoint_json(const std::string& text);
void save_checkpoint(const Mlp& mlp, const std::string& path);
Mlp load_checkpoint(const std::string& path);

}  // namespace uq::nn
