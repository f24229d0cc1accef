#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "uq/dataset.hpp"
#include "uq/estimators.hpp"
#include "uq/metrics.hpp"
#include "uq/synthdata.hpp"

namespace uq::datasel {

enum class CorruptionKind { GaussianNoise, FeatureScale, ConstantOffset, FeatureDropout };
std::string to_string(CorruptionKind k);
CorruptionKind corruption_from_string(const std::string& s);

// Derivative-free search over the feature box, maximizing a point-wise
// badness score. Pattern search with shrinking step; estimators stay
// black boxes.
struct SearchConfig {
  metrics::ScoreKind objective = metrics::ScoreKind::AbsNormalizedResidual;
  std::vector<double> box_lo;
  std::vector<double> box_hi;
  int restarts = 10;
  int steps = 200;             // probe rounds per restart
  double initial_step = 0.25;  // fraction of per-dim box width
  double shrink = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class DataSpecKind {
  FullOdd,
  SemanticSlice,
  SemanticSweep,
  QuantileSlice,
  CuratedSet,
  Shifted,
  SearchGenerated,
};
std::string to_string(DataSpecKind k);
DataSpecKind data_spec_kind_from_string(const std::string& s);

// Declarative description of an evaluation dataset: the bridge between a
// criterion's semantic data specification and concrete rows.
struct DataSpec {
  DataSpecKind kind = DataSpecKind::FullOdd;

  std::string generator;  // FullOdd / SemanticSweep: name in the registry
  std::size_t n = 0;      // FullOdd rows / SemanticSweep rows per cell

  std::string dim;                  // SemanticSlice / SemanticSweep
  double range_lo = 0.0;            // SemanticSlice numeric range, inclusive
  double range_hi = 0.0;
  std::vector<std::string> values;  // SemanticSlice categorical values
  std::vector<double> grid;         // SemanticSweep values, sorted

  metrics::ScoreKind score = metrics::ScoreKind::AbsNormalizedResidual;  // QuantileSlice
  double q_lo = 0.0;
  double q_hi = 1.0;

  std::string path;  // CuratedSet

  std::shared_ptr<const DataSpec> base;  // Shifted
  CorruptionKind corruption = CorruptionKind::GaussianNoise;
  double severity = 0.0;

  SearchConfig search;  // SearchGenerated

  void validate() const;
  std::string describe() const;
};

// Everything a selection may need to resolve: the generator registry, an
// optional base dataset (for slices), and the run seed.
struct SelectionContext {
  const std::map<std::string, synth::Generator>* generators = nullptr;
  const Dataset* base = nullptr;
  std::uint64_t seed = 0;

  const synth::Generator& generator(const std::string& name) const;
};

// Resolves a spec into concrete rows. QuantileSlice and SearchGenerated
// need the estimator; the others ignore it. An empty result raises
// EmptySelection: a test must never pass on nothing.
Dataset select(const DataSpec& spec, const SelectionContext& ctx,
               const Estimator* est);

// Input-space corruption; targets and ground truth stay untouched so
// shifted metrics remain comparable. severity 0 is the identity.
Dataset corrupt(const Dataset& data, CorruptionKind kind, double severity,
                std::uint64_t seed);

// One dataset per grid value of a single semantic dimension, everything
// else held fixed.
std::vector<Dataset> sweep(const synth::Generator& g, const std::string& dim,
                           const std::vector<double>& grid, std::size_t n,
                           std::uint64_t seed);

struct SearchHit {
  std::vector<double> x;
  double score = 0.0;
};

// R local optima found by seeded pattern search, sorted worst-first
// (score desc, coordinates lexicographic on ties).
std::vector<SearchHit> search(const std::function<double(std::span<const double>)>& objective,
                              const SearchConfig& cfg);

// Point-wise badness of est at x against the generator's ground truth; the
// standard search objective in the synthetic setting.
std::function<double(std::span<const double>)> make_objective(
    const Estimator& est, const synth::Generator& g, metrics::ScoreKind kind,
    std::uint64_t seed);

// Mean |delta sigma_total| per feature when that feature is replaced by its
// dataset mean.
std::vector<double> mask_sensitivity(const Estimator& est, const Dataset& data,
                                     std::uint64_t seed);

}  // namespace uq::datasel
