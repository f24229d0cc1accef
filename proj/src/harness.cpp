#include "uq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "uq/errors.hpp"
#include "uq/rng.hpp"

namespace uq::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Verdict from_pass_fail(criteria::PassFail pf) {
  switch (pf) {
    case criteria::PassFail::Pass: return Verdict::Pass;
    case criteria::PassFail::Fail: return Verdict::Fail;
    case criteria::PassFail::Error: return Verdict::Error;
  }
  return Verdict::Error;
}

metrics::LabeledPredictions label(const Dataset& data,
                                  std::vector<UncertaintyPrediction> preds) {
  metrics::LabeledPredictions out;
  out.preds = std::move(preds);
  out.ys.reserve(data.size());
  bool all_gt = !data.empty();
  for (const auto& row : data.rows) {
    out.ys.push_back(row.y);
    if (!row.mu_gt || !row.sigma_gt) all_gt = false;
  }
  if (all_gt) {
    out.mu_gt.reserve(data.size());
    out.sigma_gt.reserve(data.size());
    for (const auto& row : data.rows) {
      out.mu_gt.push_back(*row.mu_gt);
      out.sigma_gt.push_back(*row.sigma_gt);
    }
  }
  return out;
}

std::string format_point(std::span<const double> x) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) os << ", ";
    os << x[i];
  }
  os << "]";
  return os.str();
}

// Runs body() and folds structured failures into the error verdict; the
// result keeps the failing reason in its message.
template <typename Fn>
TestResult guarded(const TestCase& kase, Fn&& body) {
  TestResult res;
  res.test_id = kase.id;
  res.level = kase.level;
  res.criterion_id = kase.criterion_id;
  const auto start = Clock::now();
  try {
    body(res);
  } catch (const Error& e) {
    res.verdict = Verdict::Error;
    res.message = e.what();
  } catch (const std::exception& e) {
    res.verdict = Verdict::Error;
    res.message = std::string("unexpected exception: ") + e.what();
  }
  res.runtime_s = seconds_since(start);
  return res;
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Error: return "error";
    case Verdict::Skipped: return "skipped";
  }
  return "error";
}

aggregate::Verdict to_tree_verdict(Verdict v) {
  switch (v) {
    case Verdict::Pass: return aggregate::Verdict::Pass;
    case Verdict::Fail: return aggregate::Verdict::Fail;
    case Verdict::Error:
    case Verdict::Skipped: return aggregate::Verdict::Inconclusive;
  }
  return aggregate::Verdict::Inconclusive;
}

const datasel::DataSpec& RunContext::spec(const std::string& name) const {
  if (!data_specs) throw ConfigError("no data spec registry in context");
  const auto it = data_specs->find(name);
  if (it == data_specs->end()) throw ConfigError("unknown data spec: " + name);
  return it->second;
}

datasel::SelectionContext RunContext::selection(std::uint64_t seed,
                                                const Dataset* base) const {
  datasel::SelectionContext sel;
  sel.generators = generators;
  sel.base = base;
  sel.seed = seed;
  return sel;
}

std::vector<TestResult> run_technical(const Estimator& est, const Dataset& data,
                                      const TechnicalParams& params,
                                      std::uint64_t seed,
                                      const RunContext& ctx) {
  std::vector<TestResult> out;
  auto make_case = [&](const std::string& suffix) {
    TestCase kase;
    kase.id = params.id_prefix + "-" + suffix;
    kase.level = TestLevel::Technical;
    kase.criterion_id = kTechnicalCriterion;
    kase.seed = rng::derive(seed, rng::fnv1a(kase.id));
    return kase;
  };

  // 1. Output validity: every prediction finite, sigma >= the estimator's floor.
  const auto validity_case = make_case("validity");
  out.push_back(guarded(validity_case, [&](TestResult& res) {
    const double floor = est.sigma_floor();
    std::size_t invalid = 0;
    std::string first_issue;
    for (std::size_t i = 0; i < data.size(); ++i) {
      UncertaintyPrediction p;
      try {
        p = est.predict(data.rows[i].x, rng::derive(validity_case.seed, i));
      } catch (const EstimatorFault& e) {
        ++invalid;
        if (first_issue.empty()) first_issue = e.what();
        continue;
      }
      auto issue = prediction_issue(p);
      if (!issue && floor > 0.0 && p.sigma_total < floor * (1.0 - 1e-12)) {
        issue = "sigma_total below estimator floor";
      }
      if (issue) {
        ++invalid;
        if (first_issue.empty()) {
          first_issue = *issue + " at x=" + format_point(data.rows[i].x);
        }
      }
    }
    res.measured["rows"] = static_cast<double>(data.size());
    res.measured["invalid"] = static_cast<double>(invalid);
    res.verdict = invalid == 0 ? Verdict::Pass : Verdict::Fail;
    res.message = first_issue;
  }));

  // 2. Invalid-input handling: NaN features and negative incoming sigma must
  // raise structured errors, not crash or return silent numbers.
  out.push_back(guarded(make_case("input-handling"), [&](TestResult& res) {
    std::vector<double> bad(static_cast<std::size_t>(est.input_width()),
                            std::numeric_limits<double>::quiet_NaN());
    bool nan_handled = false;
    std::string issue;
    try {
      (void)est.predict(bad, 0);
      issue = "NaN input produced a prediction instead of an error";
    } catch (const Error&) {
      nan_handled = true;
    } catch (const std::exception& e) {
      issue = std::string("NaN input crashed: ") + e.what();
    }

    bool sigma_handled = false;
    std::vector<double> ok(static_cast<std::size_t>(est.input_width()), 0.0);
    try {
      std::vector<ChainStage> chain(1);
      chain[0].estimator = EstimatorPtr(&est, [](const Estimator*) {});
      (void)propagate_chain(chain, ok, -1.0, 8, 0);
      if (issue.empty()) issue = "negative incoming sigma was accepted";
    } catch (const DomainError&) {
      sigma_handled = true;
    } catch (const std::exception& e) {
      if (issue.empty()) {
        issue = std::string("negative sigma crashed: ") + e.what();
      }
    }
    res.measured["nan_input_rejected"] = nan_handled ? 1.0 : 0.0;
    res.measured["negative_sigma_rejected"] = sigma_handled ? 1.0 : 0.0;
    res.verdict = nan_handled && sigma_handled ? Verdict::Pass : Verdict::Fail;
    res.message = issue;
  }));

  // 3. Determinism: two full passes with the same seed, bit-identical.
  const auto determinism_case = make_case("determinism");
  out.push_back(guarded(determinism_case, [&](TestResult& res) {
    const std::uint64_t s = determinism_case.seed;
    const auto a = evaluate_dataset(est, data, s);
    const auto b = evaluate_dataset(est, data, s);
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].mu != b[i].mu || a[i].sigma_total != b[i].sigma_total ||
          a[i].sigma_aleatoric != b[i].sigma_aleatoric ||
          a[i].sigma_epistemic != b[i].sigma_epistemic) {
        ++mismatches;
      }
    }
    res.measured["mismatches"] = static_cast<double>(mismatches);
    res.verdict = mismatches == 0 ? Verdict::Pass : Verdict::Fail;
    if (mismatches) res.message = "same seed produced different predictions";
  }));

  // 4. Latency: per-point time quantiles and overhead vs the bare model.
  out.push_back(guarded(make_case("latency"), [&](TestResult& res) {
    std::vector<double> times_ms;
    times_ms.reserve(data.size() * static_cast<std::size_t>(params.latency.repetitions));
    for (int rep = 0; rep < params.latency.repetitions; ++rep) {
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto t0 = Clock::now();
        (void)est.predict(data.rows[i].x, rng::derive(seed, i));
        times_ms.push_back(seconds_since(t0) * 1e3);
      }
    }
    const double p50 = metrics::quantile(times_ms, 0.5);
    const double p99 = metrics::quantile(times_ms, 0.99);
    res.timing["p50_ms"] = p50;
    res.timing["p99_ms"] = p99;
    bool ok = p50 <= params.latency.p50_ms && p99 <= params.latency.p99_ms;
    if (ctx.baseline) {
      double est_total = 0.0;
      for (double t : times_ms) est_total += t;
      const auto t0 = Clock::now();
      for (int rep = 0; rep < params.latency.repetitions; ++rep) {
        for (const auto& row : data.rows) {
          (void)nn::forward(*ctx.baseline, row.x);
        }
      }
      const double bare_total = seconds_since(t0) * 1e3;
      const double overhead =
          est_total / std::max(bare_total, 1e-9);
      res.timing["overhead_ratio"] = overhead;
      ok = ok && overhead <= params.latency.max_overhead;
    }
    res.verdict = ok ? Verdict::Pass : Verdict::Fail;
    if (!ok) res.message = "latency outside configured bounds";
  }));

  return out;
}

TestResult run_global(const Estimator& est, const TestCase& kase,
                      const RunContext& ctx) {
  return guarded(kase, [&](TestResult& res) {
    const auto& spec = ctx.spec(kase.data_spec);
    const auto data = datasel::select(spec, ctx.selection(kase.seed), &est);
    auto labeled = label(data, evaluate_dataset(est, data, kase.seed));
    const double value = metrics::compute_metric(kase.measure, labeled);
    res.measured["value"] = value;

    for (std::size_t i = 0; i < kase.shifted.size(); ++i) {
      const auto& [kind, severity] = kase.shifted[i];
      const auto shifted_data =
          datasel::corrupt(data, kind, severity, rng::derive(kase.seed, 17 + i));
      auto shifted_labeled =
          label(shifted_data, evaluate_dataset(est, shifted_data, kase.seed));
      std::ostringstream key;
      key << "shifted_" << datasel::to_string(kind) << "_" << severity;
      res.measured[key.str()] =
          metrics::compute_metric(kase.measure, shifted_labeled);
    }

    double designated_value = value;
    if (ctx.baseline) {
      // Performance-uncertainty trade-off against the bare model.
      double est_sq = 0.0;
      double bare_sq = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double d_est = labeled.preds[i].mu - data.rows[i].y;
        const double bare_mu = ctx.baseline->head == nn::HeadKind::Gaussian
                                   ? nn::forward_gaussian(*ctx.baseline, data.rows[i].x).mu
                                   : nn::forward_point(*ctx.baseline, data.rows[i].x);
        const double d_bare = bare_mu - data.rows[i].y;
        est_sq += d_est * d_est;
        bare_sq += d_bare * d_bare;
      }
      const double ratio = std::sqrt(est_sq) / std::max(std::sqrt(bare_sq), 1e-12);
      res.measured["tradeoff_ratio"] = ratio;
      if (kase.designated == Designated::TradeoffRatio) designated_value = ratio;
    } else if (kase.designated == Designated::TradeoffRatio) {
      throw ConfigError("tradeoff_ratio verdict needs a baseline model");
    }

    res.verdict = from_pass_fail(
        criteria::evaluate(kase.comparator, kase.threshold, designated_value));
  });
}

TestResult run_temporal(const Estimator& est, const TestCase& kase,
                        const RunContext& ctx) {
  return guarded(kase, [&](TestResult& res) {
    const auto& spec = ctx.spec(kase.data_spec);
    auto data = datasel::select(spec, ctx.selection(kase.seed), &est);
    if (data.size() < 2) throw DomainError("temporal path needs >= 2 points");
    std::sort(data.rows.begin(), data.rows.end(),
              [](const DataRow& a, const DataRow& b) { return a.x < b.x; });
    const auto preds = evaluate_dataset(est, data, kase.seed);
    double max_rate = 0.0;
    for (std::size_t i = 1; i < preds.size(); ++i) {
      double dx_sq = 0.0;
      for (std::size_t d = 0; d < data.rows[i].x.size(); ++d) {
        const double dx = data.rows[i].x[d] - data.rows[i - 1].x[d];
        dx_sq += dx * dx;
      }
      const double dx = std::max(std::sqrt(dx_sq), 1e-9);
      const double ds = std::abs(preds[i].sigma_total - preds[i - 1].sigma_total);
      max_rate = std::max(max_rate, ds / dx);
    }
    res.measured["max_rate"] = max_rate;
    res.verdict = from_pass_fail(
        criteria::evaluate(kase.comparator, kase.threshold, max_rate));
  });
}

TestResult run_subset(const Estimator& est, const TestCase& kase,
                      const RunContext& ctx) {
  return guarded(kase, [&](TestResult& res) {
    const auto& spec = ctx.spec(kase.data_spec);

    if (spec.kind == datasel::DataSpecKind::SemanticSweep) {
      const auto cells =
          datasel::sweep(ctx.selection(kase.seed).generator(spec.generator),
                         spec.dim, spec.grid, spec.n, kase.seed);
      bool any_fail = false;
      std::string failing_cell;
      for (std::size_t c = 0; c < cells.size(); ++c) {
        const std::string cell_name =
            spec.dim + "=" + std::to_string(spec.grid[c]);
        if (cells[c].empty()) {
          throw EmptySelection("sweep cell " + cell_name + " is empty");
        }
        auto labeled = label(
            cells[c], evaluate_dataset(est, cells[c], rng::derive(kase.seed, c)));
        const double v = metrics::compute_metric(kase.measure, labeled);
        res.measured["cell_" + std::to_string(c)] = v;
        const auto pf = criteria::evaluate(kase.comparator, kase.threshold, v);
        if (pf == criteria::PassFail::Error) {
          throw StateError("cell " + cell_name + " produced NaN");
        }
        if (pf == criteria::PassFail::Fail && !any_fail) {
          any_fail = true;
          failing_cell = cell_name;
        }
      }
      res.verdict = any_fail ? Verdict::Fail : Verdict::Pass;
      if (any_fail) res.message = "cell " + failing_cell + " failed";
      return;
    }

    if (spec.kind == datasel::DataSpecKind::SearchGenerated) {
      const auto& g = ctx.selection(kase.seed).generator(spec.generator);
      datasel::SearchConfig cfg = spec.search;
      cfg.seed = rng::derive(kase.seed, cfg.seed);
      const auto hits = datasel::search(
          datasel::make_objective(est, g, cfg.objective, kase.seed), cfg);
      const double worst = hits.front().score;
      res.measured["worst_score"] = worst;
      for (std::size_t i = 0; i < hits.size() && i < 5; ++i) {
        std::ostringstream line;
        line << "x=" << format_point(hits[i].x) << " score=" << hits[i].score;
        res.artifacts.push_back(line.str());
      }
      res.verdict = from_pass_fail(
          criteria::evaluate(kase.comparator, kase.threshold, worst));
      return;
    }

    const auto data = datasel::select(spec, ctx.selection(kase.seed), &est);
    auto labeled = label(data, evaluate_dataset(est, data, kase.seed));
    const double value = metrics::compute_metric(kase.measure, labeled);
    res.measured["value"] = value;
    res.measured["rows"] = static_cast<double>(data.size());
    res.verdict =
        from_pass_fail(criteria::evaluate(kase.comparator, kase.threshold, value));
  });
}

TestResult run_complementary(const Estimator& est, const TestCase& kase,
                             const RunContext& ctx) {
  return guarded(kase, [&](TestResult& res) {
    const auto& spec = ctx.spec(kase.data_spec);
    const auto data = datasel::select(spec, ctx.selection(kase.seed), &est);
    std::map<std::string, Dataset> groups;
    for (const auto& row : data.rows) {
      if (!row.group) {
        throw CapabilityError("complementary test needs group labels on every row");
      }
      groups[*row.group].rows.push_back(row);
    }
    if (groups.size() < 2) {
      throw ConfigError("complementary test needs at least two groups");
    }
    for (const auto& [name, rows] : groups) {
      if (rows.size() < kase.min_group_size) {
        throw DomainError("group '" + name + "' has " +
                          std::to_string(rows.size()) + " rows, needs >= " +
                          std::to_string(kase.min_group_size));
      }
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& [name, group_data] : groups) {
      auto labeled = label(
          group_data,
          evaluate_dataset(est, group_data, rng::derive(kase.seed, rng::fnv1a(name))));
      const double v = metrics::compute_metric(kase.measure, labeled);
      res.measured["group_" + name] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double disparity = hi - lo;
    res.measured["disparity"] = disparity;
    res.verdict = from_pass_fail(
        criteria::evaluate(kase.comparator, kase.threshold, disparity));
  });
}

std::vector<TestCase> Suite::materialize_cases() const {
  std::vector<TestCase> all = cases;
  std::set<std::string> ids;
  std::map<std::string, const criteria::AcceptanceCriterion*> by_id;
  for (const auto& c : criteria) by_id[c.id] = &c;

  for (const auto& kase : all) {
    if (!ids.insert(kase.id).second) {
      throw ConfigError("duplicate test case id '" + kase.id + "'");
    }
    if (kase.level == TestLevel::Technical) {
      throw ConfigError("technical cases are auto-generated; case '" + kase.id +
                        "' must use a deeper level");
    }
    const auto it = by_id.find(kase.criterion_id);
    if (it == by_id.end()) {
      throw ConfigError("case '" + kase.id + "' references unknown criterion '" +
                        kase.criterion_id + "'");
    }
    const auto& depth = it->second->test_depth;
    if (std::find(depth.begin(), depth.end(), kase.level) == depth.end()) {
      throw ConfigError("case '" + kase.id + "' level outside criterion '" +
                        kase.criterion_id + "' test_depth");
    }
  }

  // Default case per (criterion, declared level) not covered explicitly.
  for (const auto& crit : criteria) {
    if (crit.manual()) continue;
    for (const auto level : crit.test_depth) {
      if (level == TestLevel::Technical) continue;  // always auto-generated
      const bool covered =
          std::any_of(all.begin(), all.end(), [&](const TestCase& k) {
            return k.criterion_id == crit.id && k.level == level;
          });
      if (covered) continue;
      TestCase kase;
      kase.id = crit.id + "--" + criteria::to_string(level);
      kase.level = level;
      kase.criterion_id = crit.id;
      kase.data_spec = crit.data_spec;
      kase.measure = crit.measure;
      kase.comparator = crit.comparator;
      kase.threshold = crit.threshold;
      if (!ids.insert(kase.id).second) {
        throw ConfigError("derived case id collides: '" + kase.id + "'");
      }
      all.push_back(std::move(kase));
    }
  }
  return all;
}

namespace {

TestResult run_one(const Estimator& est, const TestCase& kase,
                   const RunContext& ctx) {
  switch (kase.level) {
    case TestLevel::Global:
      return kase.temporal ? run_temporal(est, kase, ctx)
                           : run_global(est, kase, ctx);
    case TestLevel::SubsetPointwise: return run_subset(est, kase, ctx);
    case TestLevel::Complementary: return run_complementary(est, kase, ctx);
    case TestLevel::Technical: break;
  }
  throw ConfigError("case '" + kase.id + "' has an unrunnable level");
}

TestResult skipped_result(const TestCase& kase, const std::string& why) {
  TestResult res;
  res.test_id = kase.id;
  res.level = kase.level;
  res.criterion_id = kase.criterion_id;
  res.verdict = Verdict::Skipped;
  res.message = why;
  return res;
}

}  // namespace

SuiteOutcome run_suite(const Suite& suite) {
  if (!suite.estimator) throw ConfigError("suite needs an estimator");
  if (suite.criteria.empty()) throw ConfigError("suite needs at least one criterion");

  RunContext ctx;
  ctx.generators = &suite.generators;
  ctx.data_specs = &suite.data_specs;
  ctx.suite_seed = suite.seed;
  ctx.baseline = suite.baseline;

  SuiteOutcome outcome;
  if (suite.odd) outcome.odd_violations = odd::check_consistency(*suite.odd);

  // Resolve the technical probe dataset.
  Dataset tech_data;
  if (!suite.technical.data_spec.empty()) {
    tech_data = datasel::select(ctx.spec(suite.technical.data_spec),
                                ctx.selection(rng::derive(suite.seed, 0x7ec4u)),
                                suite.estimator.get());
  } else {
    if (suite.generators.empty()) {
      throw ConfigError("technical tests need a data spec or a generator");
    }
    tech_data = synth::generate(suite.generators.begin()->second, 64,
                                rng::derive(suite.seed, 0x7ec4u));
  }

  auto tech_results =
      run_technical(*suite.estimator, tech_data, suite.technical, suite.seed, ctx);
  bool technical_ok = std::all_of(
      tech_results.begin(), tech_results.end(),
      [](const TestResult& r) { return r.verdict == Verdict::Pass; });
  outcome.results = std::move(tech_results);

  auto cases = suite.materialize_cases();
  for (auto& kase : cases) {
    kase.seed = rng::derive(suite.seed, rng::fnv1a(kase.id));
  }
  std::stable_sort(cases.begin(), cases.end(),
                   [](const TestCase& a, const TestCase& b) {
                     const int ra = criteria::level_rank(a.level);
                     const int rb = criteria::level_rank(b.level);
                     return ra != rb ? ra < rb : a.id < b.id;
                   });

  if (suite.fail_fast && !technical_ok) {
    for (const auto& kase : cases) {
      outcome.results.push_back(
          skipped_result(kase, "skipped: technical level failed (fail-fast)"));
    }
  } else {
    // Cases within a level may run concurrently; per-case seeds keep the
    // outcome independent of scheduling.
    std::size_t begin = 0;
    while (begin < cases.size()) {
      std::size_t end = begin + 1;
      while (end < cases.size() && cases[end].level == cases[begin].level) ++end;
      const std::size_t count = end - begin;
      std::vector<TestResult> level_results(count);
      const int jobs = std::max(1, suite.jobs);
      if (jobs == 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) {
          level_results[i] = run_one(*suite.estimator, cases[begin + i], ctx);
        }
      } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
          for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            level_results[i] = run_one(*suite.estimator, cases[begin + i], ctx);
          }
        };
        std::vector<std::thread> pool;
        const std::size_t n_threads =
            std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
      }
      for (auto& r : level_results) outcome.results.push_back(std::move(r));
      begin = end;
    }
  }

  std::sort(outcome.results.begin(), outcome.results.end(),
            [](const TestResult& a, const TestResult& b) {
              return a.test_id < b.test_id;
            });

  // Aggregate: leaf verdicts -> per-criterion trees -> overall.
  std::map<std::string, aggregate::Verdict> leaves;
  for (const auto& r : outcome.results) {
    leaves[r.test_id] = to_tree_verdict(r.verdict);
  }

  std::map<std::string, aggregate::Verdict> criterion_verdicts;

  {
    // The implicit technical criterion: all four probes must pass.
    std::vector<aggregate::LogicNode> kids;
    CriterionOutcome tech_outcome;
    tech_outcome.criterion_id = kTechnicalCriterion;
    for (const auto& r : outcome.results) {
      if (r.criterion_id == kTechnicalCriterion) {
        kids.push_back(aggregate::LogicNode::leaf(r.test_id));
      }
    }
    const auto tree = aggregate::LogicNode::make_and(std::move(kids));
    tech_outcome.tree_annotation =
        aggregate::evaluate_tree_annotated(tree, leaves, &tech_outcome.verdict);
    criterion_verdicts[kTechnicalCriterion] = tech_outcome.verdict;
    outcome.criterion_outcomes.push_back(std::move(tech_outcome));
  }

  for (const auto& crit : suite.criteria) {
    CriterionOutcome co;
    co.criterion_id = crit.id;
    if (crit.manual()) {
      co.asserted_by_config = true;
      co.verdict = aggregate::Verdict::Pass;
      criterion_verdicts[crit.id] = co.verdict;
      outcome.criterion_outcomes.push_back(std::move(co));
      continue;
    }
    aggregate::LogicNode tree;
    const auto tree_it = suite.criterion_trees.find(crit.id);
    if (tree_it != suite.criterion_trees.end()) {
      tree = tree_it->second;
      // Each test id at most once per criterion subtree.
      auto ids = tree.leaf_ids();
      std::sort(ids.begin(), ids.end());
      if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw StructuralError("criterion '" + crit.id +
                              "' tree references a test id twice");
      }
    } else {
      std::vector<aggregate::LogicNode> kids;
      for (const auto& r : outcome.results) {
        if (r.criterion_id == crit.id) {
          kids.push_back(aggregate::LogicNode::leaf(r.test_id));
        }
      }
      if (kids.empty()) {
        throw StructuralError("criterion '" + crit.id + "' has no test cases");
      }
      tree = aggregate::LogicNode::make_and(std::move(kids));
    }
    co.tree_annotation = aggregate::evaluate_tree_annotated(tree, leaves, &co.verdict);
    criterion_verdicts[crit.id] = co.verdict;
    outcome.criterion_outcomes.push_back(std::move(co));

    bool saw_pass = false;
    bool saw_fail = false;
    for (const auto& r : outcome.results) {
      if (r.criterion_id != crit.id) continue;
      saw_pass |= r.verdict == Verdict::Pass;
      saw_fail |= r.verdict == Verdict::Fail;
    }
    if (saw_pass && saw_fail) outcome.conflicting_criteria.push_back(crit.id);
  }

  outcome.overall = aggregate::overall(
      criterion_verdicts, suite.policy,
      suite.root_tree ? &*suite.root_tree : nullptr);
  return outcome;
}

}  // namespace uq::harness
