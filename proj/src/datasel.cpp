#include "uq/datasel.hpp"

#include <algorithm>
#include <cmath>

#include "uq/errors.hpp"
#include "uq/rng.hpp"

namespace uq::datasel {

std::string to_string(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::GaussianNoise: return "gaussian_noise";
    case CorruptionKind::FeatureScale: return "feature_scale";
    case CorruptionKind::ConstantOffset: return "constant_offset";
    case CorruptionKind::FeatureDropout: return "feature_dropout";
  }
  return "gaussian_noise";
}

CorruptionKind corruption_from_string(const std::string& s) {
  if (s == "gaussian_noise") return CorruptionKind::GaussianNoise;
  if (s == "feature_scale") return CorruptionKind::FeatureScale;
  if (s == "constant_offset") return CorruptionKind::ConstantOffset;
  if (s == "feature_dropout") return CorruptionKind::FeatureDropout;
  throw ConfigError("unknown corruption kind: " + s);
}

void SearchConfig::validate() const {
  if (box_lo.empty() || box_lo.size() != box_hi.size()) {
    throw ConfigError("search box must be non-empty and consistent");
  }
  for (std::size_t d = 0; d < box_lo.size(); ++d) {
    if (!std::isfinite(box_lo[d]) || !std::isfinite(box_hi[d]) ||
        !(box_lo[d] < box_hi[d])) {
      throw ConfigError("search box must be bounded with lo < hi");
    }
  }
  if (restarts < 1) throw ConfigError("search requires R >= 1 restarts");
  if (steps < 0) throw ConfigError("search steps must be >= 0");
  if (!(initial_step > 0.0)) throw ConfigError("search initial step must be > 0");
  if (!(shrink > 0.0 && shrink < 1.0)) throw ConfigError("search shrink must be in (0,1)");
}

std::string to_string(DataSpecKind k) {
  switch (k) {
    case DataSpecKind::FullOdd: return "full_odd";
    case DataSpecKind::SemanticSlice: return "semantic_slice";
    case DataSpecKind::SemanticSweep: return "semantic_sweep";
    case DataSpecKind::QuantileSlice: return "quantile_slice";
    case DataSpecKind::CuratedSet: return "curated_set";
    case DataSpecKind::Shifted: return "shifted";
    case DataSpecKind::SearchGenerated: return "search_generated";
  }
  return "full_odd";
}

DataSpecKind data_spec_kind_from_string(const std::string& s) {
  if (s == "full_odd") return DataSpecKind::FullOdd;
  if (s == "semantic_slice") return DataSpecKind::SemanticSlice;
  if (s == "semantic_sweep") return DataSpecKind::SemanticSweep;
  if (s == "quantile_slice") return DataSpecKind::QuantileSlice;
  if (s == "curated_set") return DataSpecKind::CuratedSet;
  if (s == "shifted") return DataSpecKind::Shifted;
  if (s == "search_generated") return DataSpecKind::SearchGenerated;
  throw ConfigError("unknown data spec kind: " + s);
}

void DataSpec::validate() const {
  switch (kind) {
    case DataSpecKind::FullOdd:
      if (generator.empty()) throw ConfigError("full_odd needs a generator");
      if (n == 0) throw ConfigError("full_odd needs n >= 1");
      break;
    case DataSpecKind::SemanticSlice:
      if (dim.empty()) throw ConfigError("semantic_slice needs a dimension");
      if (values.empty() && !(range_lo <= range_hi)) {
        throw ConfigError("semantic_slice needs a range or categorical values");
      }
      break;
    case DataSpecKind::SemanticSweep:
      if (generator.empty() || dim.empty()) {
        throw ConfigError("semantic_sweep needs a generator and a dimension");
      }
      if (grid.empty()) throw ConfigError("semantic_sweep needs a non-empty grid");
      if (!std::is_sorted(grid.begin(), grid.end())) {
        throw ConfigError("semantic_sweep grid must be sorted");
      }
      if (n == 0) throw ConfigError("semantic_sweep needs n >= 1 per cell");
      break;
    case DataSpecKind::QuantileSlice:
      if (!(q_lo >= 0.0 && q_lo < q_hi && q_hi <= 1.0)) {
        throw ConfigError("quantile_slice needs 0 <= q_lo < q_hi <= 1");
      }
      break;
    case DataSpecKind::CuratedSet:
      if (path.empty()) throw ConfigError("curated_set needs a path");
      break;
    case DataSpecKind::Shifted:
      if (!base) throw ConfigError("shifted needs a base spec");
      if (severity < 0.0) throw ConfigError("shifted severity must be >= 0");
      base->validate();
      break;
    case DataSpecKind::SearchGenerated:
      search.validate();
      break;
  }
}

std::string DataSpec::describe() const {
  switch (kind) {
    case DataSpecKind::FullOdd:
      return "full_odd(" + generator + ", n=" + std::to_string(n) + ")";
    case DataSpecKind::SemanticSlice: return "semantic_slice(" + dim + ")";
    case DataSpecKind::SemanticSweep:
      return "semantic_sweep(" + dim + ", " + std::to_string(grid.size()) + " cells)";
    case DataSpecKind::QuantileSlice:
      return "quantile_slice(" + metrics::to_string(score) + ", [" +
             std::to_string(q_lo) + "," + std::to_string(q_hi) + "])";
    case DataSpecKind::CuratedSet: return "curated_set(" + path + ")";
    case DataSpecKind::Shifted:
      return "shifted(" + base->describe() + ", " + to_string(corruption) +
             ", " + std::to_string(severity) + ")";
    case DataSpecKind::SearchGenerated: return "search_generated";
  }
  return "data_spec";
}

const synth::Generator& SelectionContext::generator(const std::string& name) const {
  if (!generators) throw ConfigError("no generator registry in context");
  const auto it = generators->find(name);
  if (it == generators->end()) throw ConfigError("unknown generator: " + name);
  return it->second;
}

namespace {

bool semantics_match(const DataRow& row, const DataSpec& spec) {
  const auto it = row.semantics.find(spec.dim);
  if (it == row.semantics.end()) return false;
  if (!spec.values.empty()) {
    if (!std::holds_alternative<std::string>(it->second)) return false;
    const auto& v = std::get<std::string>(it->second);
    return std::find(spec.values.begin(), spec.values.end(), v) != spec.values.end();
  }
  if (!std::holds_alternative<double>(it->second)) return false;
  const double v = std::get<double>(it->second);
  return v >= spec.range_lo && v <= spec.range_hi;
}

}  // namespace

Dataset select(const DataSpec& spec, const SelectionContext& ctx,
               const Estimator* est) {
  spec.validate();
  Dataset out;
  switch (spec.kind) {
    case DataSpecKind::FullOdd:
      out = synth::generate(ctx.generator(spec.generator), spec.n, ctx.seed);
      break;
    case DataSpecKind::SemanticSlice: {
      Dataset local_base;
      const Dataset* base = ctx.base;
      if (spec.base) {
        local_base = select(*spec.base, ctx, est);
        base = &local_base;
      }
      if (!base) throw ConfigError("semantic_slice needs a base dataset");
      bool annotated = false;
      for (const auto& row : base->rows) {
        if (row.semantics.count(spec.dim)) annotated = true;
        if (semantics_match(row, spec)) out.rows.push_back(row);
      }
      if (!annotated) {
        throw ConfigError("semantic_slice: no row annotates dimension '" +
                          spec.dim + "'");
      }
      break;
    }
    case DataSpecKind::SemanticSweep: {
      const auto cells =
          sweep(ctx.generator(spec.generator), spec.dim, spec.grid, spec.n, ctx.seed);
      for (const auto& cell : cells) out.append(cell);
      break;
    }
    case DataSpecKind::QuantileSlice: {
      Dataset local_base;
      const Dataset* base_set = ctx.base;
      if (spec.base) {
        local_base = select(*spec.base, ctx, est);
        base_set = &local_base;
      }
      if (!base_set) throw ConfigError("quantile_slice needs a base dataset");
      if (!est) throw ConfigError("quantile_slice needs an estimator to score points");
      if (base_set->empty()) throw EmptySelection("quantile_slice over empty base");
      const auto preds = evaluate_dataset(*est, *base_set, ctx.seed);
      std::vector<double> ys;
      ys.reserve(base_set->size());
      for (const auto& row : base_set->rows) ys.push_back(row.y);
      const auto scores = metrics::point_scores(spec.score, preds, ys);
      std::vector<double> values;
      values.reserve(scores.size());
      for (const auto& s : scores) values.push_back(s.value);
      const double lo = metrics::quantile(values, spec.q_lo);
      const double hi = metrics::quantile(values, spec.q_hi);
      for (const auto& s : scores) {
        if (s.value >= lo && s.value <= hi) {
          out.rows.push_back(base_set->rows[s.index]);
        }
      }
      break;
    }
    case DataSpecKind::CuratedSet:
      out = synth::load_curated(spec.path);
      break;
    case DataSpecKind::Shifted: {
      const auto base = select(*spec.base, ctx, est);
      out = corrupt(base, spec.corruption, spec.severity,
                    rng::derive(ctx.seed, 0xc032u));
      break;
    }
    case DataSpecKind::SearchGenerated: {
      if (!est) throw ConfigError("search_generated needs an estimator");
      if (spec.generator.empty()) {
        throw ConfigError("search_generated needs a generator for ground truth");
      }
      const auto& g = ctx.generator(spec.generator);
      SearchConfig cfg = spec.search;
      cfg.seed = rng::derive(ctx.seed, cfg.seed);
      const auto hits = search(make_objective(*est, g, cfg.objective, ctx.seed), cfg);
      for (const auto& hit : hits) {
        DataRow row;
        row.x = hit.x;
        row.mu_gt = g.mean_at(hit.x);
        row.sigma_gt = g.noise_at(hit.x);
        row.y = *row.mu_gt;  // oracle mean; search points carry no sampled noise
        out.rows.push_back(std::move(row));
      }
      break;
    }
  }
  if (out.empty()) {
    throw EmptySelection("selection '" + spec.describe() + "' resolved to zero rows");
  }
  out.validate();
  return out;
}

Dataset corrupt(const Dataset& data, CorruptionKind kind, double severity,
                std::uint64_t seed) {
  if (severity < 0.0) throw DomainError("corruption severity must be >= 0");
  Dataset out = data;
  if (severity == 0.0) return out;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    auto& x = out.rows[i].x;
    Rng r(rng::derive(seed, i), 0xc0feULL);
    for (double& v : x) {
      switch (kind) {
        case CorruptionKind::GaussianNoise: v += severity * r.normal(); break;
        case CorruptionKind::FeatureScale: v *= 1.0 + severity; break;
        case CorruptionKind::ConstantOffset: v += severity; break;
        case CorruptionKind::FeatureDropout:
          if (r.uniform() < std::min(severity, 1.0)) v = 0.0;
          break;
      }
    }
  }
  return out;
}

std::vector<Dataset> sweep(const synth::Generator& g, const std::string& dim,
                           const std::vector<double>& grid, std::size_t n,
                           std::uint64_t seed) {
  if (grid.empty()) throw ConfigError("sweep needs a non-empty grid");
  // Throws ConfigError if dim is not a generator parameter.
  (void)g.semantic(dim);
  std::vector<Dataset> cells;
  cells.reserve(grid.size());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    synth::Generator cell_gen = g;
    cell_gen.set_semantic(dim, grid[c]);
    cells.push_back(synth::generate(cell_gen, n, rng::derive(seed, c)));
  }
  return cells;
}

std::vector<SearchHit> search(
    const std::function<double(std::span<const double>)>& objective,
    const SearchConfig& cfg) {
  cfg.validate();
  const std::size_t dims = cfg.box_lo.size();
  std::vector<double> width(dims);
  for (std::size_t d = 0; d < dims; ++d) width[d] = cfg.box_hi[d] - cfg.box_lo[d];

  std::vector<SearchHit> hits;
  hits.reserve(static_cast<std::size_t>(cfg.restarts));
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng start_rng(rng::derive(cfg.seed, static_cast<std::uint64_t>(r)), 0x5eedULL);
    std::vector<double> x(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      x[d] = cfg.box_lo[d] + width[d] * start_rng.uniform();
    }
    double best = objective(x);
    double step = cfg.initial_step;
    for (int k = 0; k < cfg.steps && step >= 1e-4; ++k) {
      // Probe +- step along each coordinate; move to the best improvement.
      double cand_best = best;
      std::size_t cand_dim = dims;
      double cand_value = 0.0;
      for (std::size_t d = 0; d < dims; ++d) {
        for (double dir : {+1.0, -1.0}) {
          double v = x[d] + dir * step * width[d];
          v = std::clamp(v, cfg.box_lo[d], cfg.box_hi[d]);
          if (v == x[d]) continue;
          const double old = x[d];
          x[d] = v;
          const double s = objective(x);
          x[d] = old;
          if (s > cand_best) {
            cand_best = s;
            cand_dim = d;
            cand_value = v;
          }
        }
      }
      if (cand_dim == dims) {
        step *= cfg.shrink;
      } else {
        x[cand_dim] = cand_value;
        best = cand_best;
      }
    }
    hits.push_back({std::move(x), best});
  }
  std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.x < b.x;
  });
  return hits;
}

std::function<double(std::span<const double>)> make_objective(
    const Estimator& est, const synth::Generator& g, metrics::ScoreKind kind,
    std::uint64_t seed) {
  return [&est, g, kind, seed](std::span<const double> x) {
    const auto p = est.predict(x, seed);
    const double y = g.mean_at(x);
    return metrics::point_score(kind, p, y);
  };
}

std::vector<double> mask_sensitivity(const Estimator& est, const Dataset& data,
                                     std::uint64_t seed) {
  if (data.empty()) throw ConfigError("mask_sensitivity needs a non-empty dataset");
  const std::size_t w = data.width();
  std::vector<double> means(w, 0.0);
  for (const auto& row : data.rows) {
    for (std::size_t j = 0; j < w; ++j) means[j] += row.x[j];
  }
  for (auto& m : means) m /= static_cast<double>(data.size());

  std::vector<double> sensitivity(w, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto base = est.predict(data.rows[i].x, rng::derive(seed, i));
    for (std::size_t j = 0; j < w; ++j) {
      auto masked = data.rows[i].x;
      masked[j] = means[j];
      const auto p = est.predict(masked, rng::derive(seed, i));
      sensitivity[j] += std::abs(p.sigma_total - base.sigma_total);
    }
  }
  for (auto& s : sensitivity) s /= static_cast<double>(data.size());
  return sensitivity;
}

}  // namespace uq::datasel
