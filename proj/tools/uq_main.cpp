#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "uq/config.hpp"
#include "uq/errors.hpp"
#include "uq/report.hpp"
#include "uq/rng.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Exit-code contract: 0 overall pass, 1 overall fail (or inconclusive),
// 2 execution error, 3 invalid config.
constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitRunError = 2;
constexpr int kExitBadConfig = 3;

bool verbose() {
  const char* env = std::getenv("UQ_LOG");
  return env && std::string(env) != "quiet" && std::string(env) != "";
}

void log_line(const std::string& msg) {
  if (verbose()) std::cerr << "[uq] " << msg << "\n";
}

std::string parent_dir(const std::string& path) {
  const auto p = fs::path(path).parent_path();
  return p.empty() ? std::string(".") : p.string();
}

int cmd_gen(const std::string& config_path, const std::string& out_dir) {
  const auto doc = uq::config::load_config_file(config_path);
  const auto requests = uq::config::parse_gen_requests(doc);
  if (requests.empty()) {
    throw uq::ConfigError("config has no 'gen' section");
  }
  const auto generators = uq::config::parse_generators(doc);
  fs::create_directories(out_dir);
  for (const auto& req : requests) {
    const auto it = generators.find(req.generator);
    if (it == generators.end()) {
      throw uq::ConfigError("gen: unknown generator '" + req.generator + "'");
    }
    const auto data = uq::synth::generate(it->second, req.n, req.seed);
    const auto path = (fs::path(out_dir) / req.file).string();
    uq::save_jsonl(data, path);
    log_line("wrote " + std::to_string(data.size()) + " rows to " + path);
    std::cout << path << "\n";
  }
  return kExitPass;
}

int cmd_run(const std::string& config_path, const std::string& report_path,
            std::optional<std::uint64_t> seed_override,
            std::optional<bool> fail_fast_override,
            std::optional<int> jobs_override) {
  const auto doc = uq::config::load_config_file(config_path);
  auto suite = uq::config::load_suite(doc, parent_dir(config_path));
  if (seed_override) suite.seed = *seed_override;
  if (fail_fast_override) suite.fail_fast = *fail_fast_override;
  if (jobs_override) suite.jobs = *jobs_override;
  log_line("suite '" + suite.name + "' seed " + std::to_string(suite.seed));

  // Past this point failures are execution errors, not config errors.
  try {
    const auto outcome = uq::harness::run_suite(suite);
    auto report = uq::report::build(doc, suite, outcome);
    if (seed_override) report["seed"] = *seed_override;
    uq::report::write_json(report, report_path);
    log_line("report written to " + report_path);
    switch (outcome.overall) {
      case uq::aggregate::Verdict::Pass: return kExitPass;
      case uq::aggregate::Verdict::Fail:
      case uq::aggregate::Verdict::Inconclusive: return kExitFail;
    }
    return kExitRunError;
  } catch (const uq::Error& e) {
    std::cerr << "execution error: " << e.what() << "\n";
    return kExitRunError;
  }
}

int cmd_search(const std::string& config_path, const std::string& out_path) {
  const auto doc = uq::config::load_config_file(config_path);
  auto suite = uq::config::load_suite(doc, parent_dir(config_path));
  if (!doc.contains("search")) {
    throw uq::ConfigError("config has no top-level 'search' block");
  }
  const auto& s = doc["search"];
  uq::datasel::SearchConfig cfg;
  cfg.objective = uq::metrics::score_from_string(
      s.value("objective", std::string("abs_normalized_residual")));
  for (const auto& pair : s.at("box")) {
    cfg.box_lo.push_back(pair.at(0).get<double>());
    cfg.box_hi.push_back(pair.at(1).get<double>());
  }
  cfg.restarts = s.value("restarts", 10);
  cfg.steps = s.value("steps", 200);
  cfg.initial_step = s.value("initial_step", 0.25);
  cfg.shrink = s.value("shrink", 0.5);
  cfg.seed = s.value("seed", suite.seed);
  const auto gen_name = s.at("generator").get<std::string>();
  const auto it = suite.generators.find(gen_name);
  if (it == suite.generators.end()) {
    throw uq::ConfigError("search: unknown generator '" + gen_name + "'");
  }
  try {
    const auto hits = uq::datasel::search(
        uq::datasel::make_objective(*suite.estimator, it->second, cfg.objective,
                                    suite.seed),
        cfg);
    std::ofstream out(out_path);
    if (!out) throw uq::ConfigError("cannot write " + out_path);
    for (const auto& hit : hits) {
      json line;
      line["x"] = hit.x;
      line["score"] = hit.score;
      out << line.dump() << "\n";
    }
    log_line("worst score " + std::to_string(hits.front().score));
    return kExitPass;
  } catch (const uq::Error& e) {
    std::cerr << "execution error: " << e.what() << "\n";
    return kExitRunError;
  }
}

int cmd_render(const std::string& report_path, const std::string& md_path) {
  const auto report = uq::report::read_json(report_path);
  if (!report.is_object() ||
      report.value("schema_version", -1) != uq::report::kSchemaVersion) {
    throw uq::ConfigError("report schema mismatch");
  }
  const auto issues = uq::report::integrity_issues(report);
  for (const auto& issue : issues) {
    std::cerr << "integrity warning: " << issue << "\n";
  }
  const auto md = uq::report::render_markdown(report);
  std::ofstream out(md_path);
  if (!out) throw uq::ConfigError("cannot write " + md_path);
  out << md;
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"requirement-driven testing of neural uncertainty estimators"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string report_path = "report.json";
  std::string md_path = "report.md";
  std::optional<std::uint64_t> seed_override;
  bool fail_fast_flag = false;
  bool fail_fast_set = false;
  std::optional<int> jobs_override;

  auto* gen = app.add_subcommand("gen", "generate datasets from the config");
  gen->add_option("--config", config_path, "suite config json")->required();
  gen->add_option("--out", out_path, "output directory")->required();

  auto* run = app.add_subcommand("run", "execute the test suite");
  run->add_option("--config", config_path, "suite config json")->required();
  run->add_option("--report", report_path, "report output path");
  std::uint64_t seed_value = 0;
  auto* seed_opt = run->add_option("--seed", seed_value, "override the suite seed");
  auto* ff_opt = run->add_flag("--fail-fast", fail_fast_flag,
                               "abort deeper levels when a technical test fails");
  int jobs_value = 0;
  auto* jobs_opt = run->add_option(
      "--jobs", jobs_value, "parallel cases per level (default: hardware)");

  auto* search = app.add_subcommand("search", "standalone worst-case search");
  search->add_option("--config", config_path, "suite config json")->required();
  search->add_option("--out", out_path, "jsonl output of worst inputs")->required();

  auto* render = app.add_subcommand("render", "render a report to markdown");
  render->add_option("--report", report_path, "report json")->required();
  render->add_option("--md", md_path, "markdown output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen(config_path, out_path);
    if (run->parsed()) {
      if (seed_opt->count()) seed_override = seed_value;
      fail_fast_set = ff_opt->count() > 0;
      if (jobs_opt->count()) {
        jobs_override = jobs_value;
      } else {
        jobs_override = static_cast<int>(
            std::max(1u, std::thread::hardware_concurrency()));
      }
      return cmd_run(config_path, report_path, seed_override,
                     fail_fast_set ? std::optional<bool>(true) : std::nullopt,
                     jobs_override);
    }
    if (search->parsed()) return cmd_search(config_path, out_path);
    if (render->parsed()) return cmd_render(report_path, md_path);
  } catch (const uq::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const uq::ParseError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const uq::StructuralError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const uq::Error& e) {
    std::cerr << "execution error: " << e.what() << "\n";
    return kExitRunError;
  } catch (const std::exception& e) {
    std::cerr << "execution error: " << e.what() << "\n";
    return kExitRunError;
  }
  return kExitBadConfig;
}
