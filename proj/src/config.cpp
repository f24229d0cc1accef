#include "uq/config.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "uq/errors.hpp"
#include "uq/rng.hpp"

namespace uq::config {

using json = nlohmann::json;

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid config json: ") + e.what());
  }
}

namespace {

std::string join_path(const std::string& base, const std::string& rel) {
  if (rel.empty() || rel.front() == '/' || base.empty()) return rel;
  return base + "/" + rel;
}

synth::Generator parse_generator(const json& g, const std::string& where) {
  synth::Generator gen;
  try {
    if (g.contains("mean")) gen.mean_fn = synth::mean_from_string(g["mean"].get<std::string>());
    if (g.contains("noise")) gen.noise_fn = synth::noise_from_string(g["noise"].get<std::string>());
    if (g.contains("sampler")) gen.sampler = synth::sampler_from_string(g["sampler"].get<std::string>());
    if (g.contains("amplitude")) gen.amplitude = g["amplitude"].get<double>();
    if (g.contains("frequency")) gen.frequency = g["frequency"].get<double>();
    if (g.contains("shift")) gen.shift = g["shift"].get<double>();
    if (g.contains("noise_scale")) gen.noise_scale = g["noise_scale"].get<double>();
    if (g.contains("poly_coeffs")) gen.poly_coeffs = g["poly_coeffs"].get<std::vector<double>>();
    if (g.contains("noise_base")) gen.noise_base = g["noise_base"].get<double>();
    if (g.contains("noise_slope")) gen.noise_slope = g["noise_slope"].get<double>();
    if (g.contains("noise_threshold")) gen.noise_threshold = g["noise_threshold"].get<double>();
    if (g.contains("noise_hi")) gen.noise_hi = g["noise_hi"].get<double>();
    if (g.contains("box")) {
      gen.box_lo.clear();
      gen.box_hi.clear();
      for (const auto& pair : g["box"]) {
        gen.box_lo.push_back(pair.at(0).get<double>());
        gen.box_hi.push_back(pair.at(1).get<double>());
      }
    }
    if (g.contains("group")) gen.group = g["group"].get<std::string>();
    gen.validate();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return gen;
}

metrics::MetricKind parse_metric(const json& m, const std::string& where) {
  // Reuse the criteria parser by wrapping into a single-criterion document.
  metrics::MetricKind kind;
  if (!m.is_object() || !m.contains("kind")) {
    throw ConfigError(where + ": measure must be an object with 'kind'");
  }
  kind.id = metrics::metric_id_from_string(m.at("kind").get<std::string>());
  if (m.contains("levels")) kind.levels = m["levels"].get<int>();
  if (m.contains("bins")) kind.bins = m["bins"].get<int>();
  if (m.contains("alpha")) kind.alpha = m["alpha"].get<double>();
  if (m.contains("q")) kind.q = m["q"].get<double>();
  if (m.contains("score")) kind.score = metrics::score_from_string(m["score"].get<std::string>());
  if (m.contains("stat")) kind.width_stat = m["stat"].get<std::string>();
  kind.validate();
  return kind;
}

datasel::SearchConfig parse_search(const json& s, const std::string& where) {
  datasel::SearchConfig cfg;
  try {
    if (s.contains("objective")) {
      cfg.objective = metrics::score_from_string(s["objective"].get<std::string>());
    }
    for (const auto& pair : s.at("box")) {
      cfg.box_lo.push_back(pair.at(0).get<double>());
      cfg.box_hi.push_back(pair.at(1).get<double>());
    }
    if (s.contains("restarts")) cfg.restarts = s["restarts"].get<int>();
    if (s.contains("steps")) cfg.steps = s["steps"].get<int>();
    if (s.contains("initial_step")) cfg.initial_step = s["initial_step"].get<double>();
    if (s.contains("shrink")) cfg.shrink = s["shrink"].get<double>();
    if (s.contains("seed")) cfg.seed = s["seed"].get<std::uint64_t>();
    cfg.validate();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return cfg;
}

// Data specs may reference each other by name through `base`; resolve
// recursively with cycle detection.
struct SpecResolver {
  const json* doc = nullptr;
  std::string base_dir;
  std::map<std::string, datasel::DataSpec> done;
  std::set<std::string> visiting;

  datasel::DataSpec parse(const json& s, const std::string& where) {
    datasel::DataSpec spec;
    try {
      spec.kind = datasel::data_spec_kind_from_string(s.at("kind").get<std::string>());
      if (s.contains("generator")) spec.generator = s["generator"].get<std::string>();
      if (s.contains("n")) spec.n = s["n"].get<std::size_t>();
      if (s.contains("dim")) spec.dim = s["dim"].get<std::string>();
      if (s.contains("range")) {
        spec.range_lo = s["range"].at(0).get<double>();
        spec.range_hi = s["range"].at(1).get<double>();
      }
      if (s.contains("values")) spec.values = s["values"].get<std::vector<std::string>>();
      if (s.contains("grid")) spec.grid = s["grid"].get<std::vector<double>>();
      if (s.contains("score")) spec.score = metrics::score_from_string(s["score"].get<std::string>());
      if (s.contains("q")) {
        spec.q_lo = s["q"].at(0).get<double>();
        spec.q_hi = s["q"].at(1).get<double>();
      }
      if (s.contains("path")) spec.path = join_path(base_dir, s["path"].get<std::string>());
      if (s.contains("corruption")) {
        spec.corruption = datasel::corruption_from_string(s["corruption"].get<std::string>());
      }
      if (s.contains("severity")) spec.severity = s["severity"].get<double>();
      if (s.contains("search")) spec.search = parse_search(s["search"], where + ".search");
      if (s.contains("base")) {
        const auto base_name = s["base"].get<std::string>();
        spec.base = std::make_shared<datasel::DataSpec>(resolve(base_name));
      }
      spec.validate();
    } catch (const json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
    return spec;
  }

  datasel::DataSpec resolve(const std::string& name) {
    const auto it = done.find(name);
    if (it != done.end()) return it->second;
    if (!visiting.insert(name).second) {
      throw ConfigError("data spec cycle through '" + name + "'");
    }
    if (!doc->contains(name)) {
      throw ConfigError("unknown data spec '" + name + "'");
    }
    auto spec = parse((*doc)[name], "data_specs." + name);
    visiting.erase(name);
    done[name] = spec;
    return spec;
  }
};

nn::TrainConfig parse_train_config(const json& t, const std::string& where) {
  nn::TrainConfig cfg;
  try {
    if (t.contains("lr")) cfg.learning_rate = t["lr"].get<double>();
    if (t.contains("epochs")) cfg.epochs = t["epochs"].get<int>();
    if (t.contains("batch")) cfg.batch_size = t["batch"].get<int>();
    if (t.contains("seed")) cfg.seed = t["seed"].get<std::uint64_t>();
    if (t.contains("loss")) {
      const auto s = t["loss"].get<std::string>();
      if (s == "mse") cfg.loss = nn::LossKind::Mse;
      else if (s == "gaussian_nll") cfg.loss = nn::LossKind::GaussianNll;
      else throw ConfigError("unknown loss: " + s);
    }
    if (t.contains("optimizer")) {
      const auto s = t["optimizer"].get<std::string>();
      if (s == "sgd") cfg.optimizer = nn::OptimizerKind::Sgd;
      else if (s == "adam") cfg.optimizer = nn::OptimizerKind::Adam;
      else throw ConfigError("unknown optimizer: " + s);
    }
    cfg.validate();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return cfg;
}

// Builds (or loads) a model from a model block. seed_offset derives member
// seeds for ensembles without repeating configs.
nn::Mlp build_model(const json& m, const std::string& where,
                    const std::string& base_dir,
                    const std::map<std::string, synth::Generator>& generators,
                    std::uint64_t seed_offset) {
  if (m.contains("checkpoint")) {
    return nn::load_checkpoint(join_path(base_dir, m["checkpoint"].get<std::string>()));
  }
  try {
    const auto widths = m.at("widths").get<std::vector<int>>();
    std::vector<nn::Activation> acts;
    for (const auto& a : m.at("activations")) {
      acts.push_back(nn::activation_from_string(a.get<std::string>()));
    }
    std::vector<double> dropout(widths.size() - 2, 0.0);
    if (m.contains("dropout")) dropout = m["dropout"].get<std::vector<double>>();
    const auto head = nn::head_from_string(m.at("head").get<std::string>());
    const double sigma_floor = m.value("sigma_floor", 1e-4);
    const std::uint64_t init_seed =
        rng::derive(m.value("init_seed", std::uint64_t{1}), seed_offset);
    auto mlp = nn::make_mlp(widths, acts, dropout, head, init_seed, sigma_floor);

    if (m.contains("train")) {
      const auto& phases = m["train"];
      if (!phases.is_array()) throw ConfigError(where + ".train must be an array of phases");
      for (std::size_t p = 0; p < phases.size(); ++p) {
        const auto& phase = phases[p];
        const std::string pw = where + ".train[" + std::to_string(p) + "]";
        const auto gen_name = phase.at("generator").get<std::string>();
        const auto it = generators.find(gen_name);
        if (it == generators.end()) {
          throw ConfigError(pw + ": unknown generator '" + gen_name + "'");
        }
        const auto n = phase.at("n").get<std::size_t>();
        const std::uint64_t data_seed =
            rng::derive(phase.value("data_seed", std::uint64_t{100} + p), seed_offset);
        auto cfg = parse_train_config(phase, pw);
        cfg.seed = rng::derive(cfg.seed, seed_offset);
        const auto data = synth::generate(it->second, n, data_seed);
        nn::train(mlp, data, cfg);
      }
    }
    return mlp;
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

EstimatorPtr build_estimator(const json& e, const std::string& where,
                             const json& doc, const std::string& base_dir,
                             const std::map<std::string, synth::Generator>& generators) {
  try {
    const auto variant = e.at("variant").get<std::string>();
    EstimatorPtr est;
    if (variant == "parametric_gaussian") {
      est = std::make_shared<ParametricGaussian>(
          build_model(doc.at("model"), "model", base_dir, generators, 0));
    } else if (variant == "mc_dropout") {
      est = std::make_shared<McDropout>(
          build_model(doc.at("model"), "model", base_dir, generators, 0),
          e.value("rate", 0.1), e.value("samples", 50));
    } else if (variant == "deep_ensemble") {
      std::vector<nn::Mlp> members;
      if (e.contains("checkpoints")) {
        for (const auto& path : e["checkpoints"]) {
          members.push_back(
              nn::load_checkpoint(join_path(base_dir, path.get<std::string>())));
        }
      } else {
        const int m_count = e.value("members", 5);
        for (int m = 0; m < m_count; ++m) {
          members.push_back(build_model(doc.at("model"), "model", base_dir,
                                        generators,
                                        static_cast<std::uint64_t>(m) + 1));
        }
      }
      est = std::make_shared<DeepEnsemble>(std::move(members));
    } else if (variant == "scaled") {
      if (!e.contains("inner")) throw ConfigError(where + ": scaled needs 'inner'");
      auto inner = build_estimator(e["inner"], where + ".inner", doc, base_dir, generators);
      if (e.contains("scale")) {
        est = std::make_shared<Scaled>(inner, e["scale"].get<double>());
      } else if (e.contains("calibrate")) {
        const auto& cal = e["calibrate"];
        const auto gen_name = cal.at("generator").get<std::string>();
        const auto it = generators.find(gen_name);
        if (it == generators.end()) {
          throw ConfigError(where + ".calibrate: unknown generator '" + gen_name + "'");
        }
        const auto calib = synth::generate(it->second, cal.value("n", std::size_t{512}),
                                           cal.value("seed", std::uint64_t{77}));
        est = fit_scale(inner, calib, cal.value("seed", std::uint64_t{77})).first;
      } else {
        throw ConfigError(where + ": scaled needs 'scale' or 'calibrate'");
      }
    } else if (variant == "bypass_black_box") {
      auto model = std::make_shared<nn::Mlp>(
          build_model(doc.at("model"), "model", base_dir, generators, 0));
      const int width = model->input_width();
      auto fn = [model](std::span<const double> x) {
        return model->head == nn::HeadKind::Gaussian
                   ? nn::forward_gaussian(*model, x).mu
                   : nn::forward_point(*model, x);
      };
      est = std::make_shared<BypassBlackBox>(fn, width, e.value("margin", 0.0));
    } else {
      throw ConfigError(where + ": unknown estimator variant '" + variant + "'");
    }
    if (e.contains("inject_fault")) {
      est = std::make_shared<FaultInjected>(
          est, FaultInjected::fault_from_string(e["inject_fault"].get<std::string>()));
    }
    return est;
  } catch (const json::exception& ex) {
    throw ConfigError(where + ": " + ex.what());
  }
}

odd::OddSpec parse_odd(const json& o) {
  odd::OddSpec spec;
  try {
    if (o.contains("eps")) spec.borderline_eps = o["eps"].get<double>();
    for (const auto& d : o.at("dimensions")) {
      odd::SemanticDimension dim;
      dim.name = d.at("name").get<std::string>();
      if (d.contains("values")) {
        dim.categorical = true;
        dim.allowed = d["values"].get<std::vector<std::string>>();
      } else {
        dim.min = d.at("min").get<double>();
        dim.max = d.at("max").get<double>();
      }
      spec.dimensions.push_back(std::move(dim));
    }
    if (o.contains("performance_ranges")) {
      for (const auto& pr : o["performance_ranges"]) {
        spec.performance_ranges.push_back({pr.at("dimension").get<std::string>(),
                                           pr.at("min").get<double>(),
                                           pr.at("max").get<double>()});
      }
    }
    auto parse_points = [](const json& arr) {
      std::vector<SemanticPoint> points;
      for (const auto& p : arr) {
        SemanticPoint point;
        for (const auto& [key, value] : p.items()) {
          if (value.is_number()) point[key] = value.get<double>();
          else point[key] = value.get<std::string>();
        }
        points.push_back(std::move(point));
      }
      return points;
    };
    if (o.contains("scenarios")) {
      const auto& s = o["scenarios"];
      if (s.contains("in_domain")) spec.in_domain = parse_points(s["in_domain"]);
      if (s.contains("out_of_domain")) spec.out_of_domain = parse_points(s["out_of_domain"]);
      if (s.contains("borderline")) spec.borderline = parse_points(s["borderline"]);
    }
    spec.validate();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("odd: ") + e.what());
  }
  return spec;
}

harness::TestCase parse_test_case(const json& t, std::size_t index,
                                  const std::vector<criteria::AcceptanceCriterion>& crits) {
  const std::string where = "tests[" + std::to_string(index) + "]";
  harness::TestCase kase;
  try {
    kase.id = t.at("id").get<std::string>();
    kase.level = criteria::level_from_string(t.at("level").get<std::string>());
    kase.criterion_id = t.at("criterion").get<std::string>();

    // Defaults inherit from the backing criterion; cases may refine them.
    const auto it = std::find_if(crits.begin(), crits.end(), [&](const auto& c) {
      return c.id == kase.criterion_id;
    });
    if (it == crits.end()) {
      throw ConfigError(where + ": unknown criterion '" + kase.criterion_id + "'");
    }
    kase.data_spec = it->data_spec;
    kase.measure = it->measure;
    kase.comparator = it->comparator;
    kase.threshold = it->threshold;

    if (t.contains("data_spec")) kase.data_spec = t["data_spec"].get<std::string>();
    if (t.contains("measure")) kase.measure = parse_metric(t["measure"], where + ".measure");
    if (t.contains("comparator")) {
      kase.comparator = criteria::comparator_from_string(t["comparator"].get<std::string>());
    }
    if (t.contains("threshold")) kase.threshold = t["threshold"].get<double>();
    if (t.contains("temporal")) kase.temporal = t["temporal"].get<bool>();
    if (t.contains("designated")) {
      const auto d = t["designated"].get<std::string>();
      if (d == "metric") kase.designated = harness::Designated::Metric;
      else if (d == "tradeoff_ratio") kase.designated = harness::Designated::TradeoffRatio;
      else throw ConfigError(where + ": unknown designated value '" + d + "'");
    }
    if (t.contains("min_group_size")) {
      kase.min_group_size = t["min_group_size"].get<std::size_t>();
    }
    if (t.contains("shifted")) {
      for (const auto& s : t["shifted"]) {
        kase.shifted.emplace_back(
            datasel::corruption_from_string(s.at("kind").get<std::string>()),
            s.at("severity").get<double>());
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return kase;
}

}  // namespace

std::map<std::string, synth::Generator> parse_generators(const json& doc) {
  if (!doc.contains("generators") || !doc["generators"].is_object()) {
    throw ConfigError("config needs a 'generators' object");
  }
  std::map<std::string, synth::Generator> out;
  for (const auto& [name, g] : doc["generators"].items()) {
    out[name] = parse_generator(g, "generators." + name);
  }
  return out;
}

std::vector<GenRequest> parse_gen_requests(const json& doc) {
  std::vector<GenRequest> out;
  if (!doc.contains("gen")) return out;
  const auto& arr = doc["gen"];
  if (!arr.is_array()) throw ConfigError("gen section must be an array");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    try {
      GenRequest req;
      req.generator = arr[i].at("generator").get<std::string>();
      req.n = arr[i].at("n").get<std::size_t>();
      req.seed = arr[i].value("seed", std::uint64_t{0});
      req.file = arr[i].at("file").get<std::string>();
      out.push_back(std::move(req));
    } catch (const json::exception& e) {
      throw ConfigError("gen[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return out;
}

harness::Suite load_suite(const json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw ConfigError("config must be a json object");
  harness::Suite suite;
  try {
    suite.name = doc.value("suite", std::string("suite"));
    suite.seed = doc.value("seed", std::uint64_t{0});
    suite.fail_fast = doc.value("fail_fast", false);
    suite.jobs = doc.value("jobs", 1);

    suite.generators = parse_generators(doc);

    if (doc.contains("data_specs")) {
      SpecResolver resolver;
      resolver.doc = &doc["data_specs"];
      resolver.base_dir = base_dir;
      for (const auto& [name, unused] : doc["data_specs"].items()) {
        (void)unused;
        suite.data_specs[name] = resolver.resolve(name);
      }
      // Referenced files must exist before anything executes.
      std::function<void(const datasel::DataSpec&)> check_paths =
          [&](const datasel::DataSpec& spec) {
            if (spec.kind == datasel::DataSpecKind::CuratedSet) {
              std::ifstream probe(spec.path);
              if (!probe) {
                throw ConfigError("curated set file not found: " + spec.path);
              }
            }
            if (spec.base) check_paths(*spec.base);
          };
      for (const auto& [name, spec] : suite.data_specs) check_paths(spec);
    }

    suite.criteria = criteria::parse_criteria(doc.at("criteria"));
    for (const auto& crit : suite.criteria) {
      if (!crit.manual() && !suite.data_specs.count(crit.data_spec)) {
        throw ConfigError("criterion '" + crit.id + "' references unknown data spec '" +
                          crit.data_spec + "'");
      }
    }

    if (doc.contains("tests")) {
      for (std::size_t i = 0; i < doc["tests"].size(); ++i) {
        auto kase = parse_test_case(doc["tests"][i], i, suite.criteria);
        if (!suite.data_specs.count(kase.data_spec)) {
          throw ConfigError("case '" + kase.id + "' references unknown data spec '" +
                            kase.data_spec + "'");
        }
        suite.cases.push_back(std::move(kase));
      }
    }

    suite.estimator = build_estimator(doc.at("estimator"), "estimator", doc,
                                      base_dir, suite.generators);
    if (doc.contains("baseline")) {
      suite.baseline = std::make_shared<nn::Mlp>(
          build_model(doc["baseline"], "baseline", base_dir, suite.generators, 0));
    }

    if (doc.contains("odd")) suite.odd = parse_odd(doc["odd"]);

    if (doc.contains("trees")) {
      for (const auto& [crit_id, tree] : doc["trees"].items()) {
        suite.criterion_trees[crit_id] = aggregate::tree_from_json(tree);
      }
    }
    const auto policy = doc.value("policy", std::string("strict"));
    if (policy == "strict") {
      suite.policy = aggregate::OverallPolicy::Strict;
    } else if (policy == "tree") {
      suite.policy = aggregate::OverallPolicy::Tree;
      if (!doc.contains("root_tree")) {
        throw ConfigError("policy 'tree' needs a root_tree");
      }
      suite.root_tree = aggregate::tree_from_json(doc["root_tree"]);
    } else {
      throw ConfigError("unknown policy: " + policy);
    }

    if (doc.contains("technical")) {
      const auto& t = doc["technical"];
      if (t.contains("data_spec")) {
        suite.technical.data_spec = t["data_spec"].get<std::string>();
        if (!suite.data_specs.count(suite.technical.data_spec)) {
          throw ConfigError("technical references unknown data spec '" +
                            suite.technical.data_spec + "'");
        }
      }
      if (t.contains("latency")) {
        const auto& l = t["latency"];
        suite.technical.latency.repetitions = l.value("repetitions", 3);
        suite.technical.latency.p50_ms = l.value("p50_ms", 50.0);
        suite.technical.latency.p99_ms = l.value("p99_ms", 250.0);
        suite.technical.latency.max_overhead = l.value("max_overhead", 1000.0);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  // Surface structural defects (duplicate ids, bad levels) at load time.
  (void)suite.materialize_cases();
  return suite;
}

std::string config_digest(const json& doc) {
  json normalized = doc;
  normalized.erase("jobs");
  const std::string dump = normalized.dump();
  std::ostringstream os;
  os << std::hex << rng::fnv1a(dump);
  return os.str();
}

}  // namespace uq::config
