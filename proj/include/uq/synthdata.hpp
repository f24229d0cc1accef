#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uq/dataset.hpp"

namespace uq::synth {

enum class MeanFn { Sin, Polynomial, Piecewise };
enum class NoiseFn { Constant, AffineAbs, Step };
enum class XSampler { UniformBox, Gaussian };

std::string to_string(MeanFn f);
MeanFn mean_from_string(const std::string& s);
std::string to_string(NoiseFn f);
NoiseFn noise_from_string(const std::string& s);
std::string to_string(XSampler s);
XSampler sampler_from_string(const std::string& s);

// Seeded synthetic regression source with known heteroscedastic noise. The
// semantic parameters (amplitude, frequency, shift, noise_scale) double as
// the semantic dimensions recorded on every generated row, so sweeps and
// slices can trust the annotations.
struct Generator {
  MeanFn mean_fn = MeanFn::Sin;
  NoiseFn noise_fn = NoiseFn::AffineAbs;
  XSampler sampler = XSampler::UniformBox;

  double amplitude = 1.0;
  double frequency = 1.0;
  double shift = 0.0;        // translates the x-sampling region
  double noise_scale = 1.0;  // multiplies the noise function

  std::vector<double> poly_coeffs = {0.0, 1.0};  // c0 + c1 x + c2 x^2 + ...
  double noise_base = 0.1;
  double noise_slope = 0.0;       // affine_abs: base + slope * |x0|
  double noise_threshold = 0.0;   // step: base below, hi at/above |x0| = thr
  double noise_hi = 0.0;

  std::vector<double> box_lo = {-3.0};  // uniform box / gaussian mean
  std::vector<double> box_hi = {3.0};   // uniform box / gaussian std (hi-lo)/2

  std::optional<std::string> group;

  std::size_t dim() const { return box_lo.size(); }
  void validate() const;

  // Ground-truth mean and noise level at x (first coordinate drives the
  // 1-D mean/noise shapes; higher dims pass through the polynomial sum).
  double mean_at(std::span<const double> x) const;
  double noise_at(std::span<const double> x) const;

  // Set a semantic parameter by name; throws ConfigError for unknown names.
  void set_semantic(const std::string& name, double value);
  double semantic(const std::string& name) const;
};

// Names of the semantic dimensions a generator realizes.
const std::vector<std::string>& semantic_dimension_names();

// y_i = mean(x_i) + noise(x_i) * eps_i, eps std normal from a counter RNG
// keyed by (seed, row, purpose). Rows record sigma_gt, mu_gt and the
// semantic parameters. Bit-reproducible; sharding-safe.
Dataset generate(const Generator& g, std::size_t n, std::uint64_t seed);

// Curated scenario sets from disk (JSON Lines, see dataset.hpp).
Dataset load_curated(const std::string& path);

// The demo task used throughout the acceptance suite:
// x in [-3,3], f(x) = sin(2x), sigma_gt(x) = 0.1 + 0.2 |x|.
Generator canonical_task();

}  // namespace uq::synth
