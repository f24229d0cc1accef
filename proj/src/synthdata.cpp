#include "uq/synthdata.hpp"

#include <cmath>

#include "uq/errors.hpp"
#include "uq/rng.hpp"

namespace uq::synth {

namespace {
// RNG purpose streams, so draws never alias across uses.
constexpr std::uint64_t kStreamX = 1;
constexpr std::uint64_t kStreamNoise = 2;
}  // namespace

std::string to_string(MeanFn f) {
  switch (f) {
    case MeanFn::Sin: return "sin";
    case MeanFn::Polynomial: return "polynomial";
    case MeanFn::Piecewise: return "piecewise";
  }
  return "sin";
}

MeanFn mean_from_string(const std::string& s) {
  if (s == "sin") return MeanFn::Sin;
  if (s == "polynomial") return MeanFn::Polynomial;
  if (s == "piecewise") return MeanFn::Piecewise;
  throw ConfigError("unknown mean function: " + s);
}

std::string to_string(NoiseFn f) {
  switch (f) {
    case NoiseFn::Constant: return "constant";
    case NoiseFn::AffineAbs: return "affine_abs";
    case NoiseFn::Step: return "step";
  }
  return "constant";
}

NoiseFn noise_from_string(const std::string& s) {
  if (s == "constant") return NoiseFn::Constant;
  if (s == "affine_abs") return NoiseFn::AffineAbs;
  if (s == "step") return NoiseFn::Step;
  throw ConfigError("unknown noise function: " + s);
}

std::string to_string(XSampler s) {
  return s == XSampler::UniformBox ? "uniform" : "gaussian";
}

XSampler sampler_from_string(const std::string& s) {
  if (s == "uniform") return XSampler::UniformBox;
  if (s == "gaussian") return XSampler::Gaussian;
  throw ConfigError("unknown sampler: " + s);
}

void Generator::validate() const {
  if (box_lo.empty() || box_lo.size() != box_hi.size()) {
    throw ConfigError("generator box must be non-empty and consistent");
  }
  for (std::size_t d = 0; d < box_lo.size(); ++d) {
    if (!(box_lo[d] < box_hi[d])) {
      throw ConfigError("generator box must have lo < hi per dimension");
    }
  }
  if (noise_scale < 0.0) throw ConfigError("noise_scale must be >= 0");
  if (mean_fn == MeanFn::Polynomial && poly_coeffs.empty()) {
    throw ConfigError("polynomial mean needs coefficients");
  }
}

double Generator::mean_at(std::span<const double> x) const {
  const double x0 = x[0];
  switch (mean_fn) {
    case MeanFn::Sin:
      return amplitude * std::sin(frequency * x0);
    case MeanFn::Polynomial: {
      double acc = 0.0;
      double pow_x = 1.0;
      for (double c : poly_coeffs) {
        acc += c * pow_x;
        pow_x *= x0;
      }
      return amplitude * acc;
    }
    case MeanFn::Piecewise:
      // Kink at the origin; a deliberately non-smooth target.
      return amplitude * (x0 < 0.0 ? -0.5 * x0 : std::sin(frequency * x0));
  }
  return 0.0;
}

double Generator::noise_at(std::span<const double> x) const {
  const double x0 = x[0];
  double level = 0.0;
  switch (noise_fn) {
    case NoiseFn::Constant: level = noise_base; break;
    case NoiseFn::AffineAbs: level = noise_base + noise_slope * std::abs(x0); break;
    case NoiseFn::Step:
      level = std::abs(x0) >= noise_threshold ? noise_hi : noise_base;
      break;
  }
  return noise_scale * level;
}

void Generator::set_semantic(const std::string& name, double value) {
  if (name == "amplitude") amplitude = value;
  else if (name == "frequency") frequency = value;
  else if (name == "shift") shift = value;
  else if (name == "noise_scale") noise_scale = value;
  else throw ConfigError("unknown semantic dimension: " + name);
}

double Generator::semantic(const std::string& name) const {
  if (name == "amplitude") return amplitude;
  if (name == "frequency") return frequency;
  if (name == "shift") return shift;
  if (name == "noise_scale") return noise_scale;
  throw ConfigError("unknown semantic dimension: " + name);
}

const std::vector<std::string>& semantic_dimension_names() {
  static const std::vector<std::string> names = {"amplitude", "frequency",
                                                 "shift", "noise_scale"};
  return names;
}

Dataset generate(const Generator& g, std::size_t n, std::uint64_t seed) {
  g.validate();
  if (n < 1) throw ConfigError("generate requires n >= 1");
  Dataset data;
  data.rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    DataRow row;
    row.x.resize(g.dim());
    for (std::size_t d = 0; d < g.dim(); ++d) {
      const std::uint64_t bits = rng::at(seed, kStreamX, i * g.dim() + d);
      if (g.sampler == XSampler::UniformBox) {
        row.x[d] = g.box_lo[d] + (g.box_hi[d] - g.box_lo[d]) * rng::to_unit(bits);
      } else {
        // Gaussian centered on the box with std = quarter box width.
        const double center = 0.5 * (g.box_lo[d] + g.box_hi[d]);
        const double sd = 0.25 * (g.box_hi[d] - g.box_lo[d]);
        const double u1 = static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
        const double u2 = rng::to_unit(
            rng::at(seed, kStreamX, (n + i) * g.dim() + d));
        row.x[d] = center + sd * std::sqrt(-2.0 * std::log(u1)) *
                                std::cos(2.0 * std::acos(-1.0) * u2);
      }
      row.x[d] += g.shift;
    }
    const double sigma = g.noise_at(row.x);
    if (sigma < 0.0) {
      throw ConfigError("noise function negative at a sampled point");
    }
    const double mu = g.mean_at(row.x);
    // Box-Muller from two dedicated noise draws.
    const double u1 = static_cast<double>(
                          (rng::at(seed, kStreamNoise, 2 * i) >> 11) + 1) *
                      0x1.0p-53;
    const double u2 = rng::to_unit(rng::at(seed, kStreamNoise, 2 * i + 1));
    const double eps =
        std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::acos(-1.0) * u2);
    row.y = mu + sigma * eps;
    row.mu_gt = mu;
    row.sigma_gt = sigma;
    for (const auto& name : semantic_dimension_names()) {
      row.semantics[name] = g.semantic(name);
    }
    row.group = g.group;
    data.rows.push_back(std::move(row));
  }
  return data;
}

Dataset load_curated(const std::string& path) { return load_jsonl(path); }

Generator canonical_task() {
  Generator g;
  g.mean_fn = MeanFn::Sin;
  g.amplitude = 1.0;
  g.frequency = 2.0;
  g.shift = 0.0;
  g.noise_fn = NoiseFn::AffineAbs;
  g.noise_base = 0.1;
  g.noise_slope = 0.2;
  g.noise_scale = 1.0;
  g.sampler = XSampler::UniformBox;
  g.box_lo = {-3.0};
  g.box_hi = {3.0};
  return g;
}

}  // namespace uq::synth
