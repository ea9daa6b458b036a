// Operator entry point: lint rule files, run single scenarios, run the
// ablation sweep, export the dependency graph.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "adaptron/harness.hpp"
#include "adaptron/mapek.hpp"
#include "adaptron/rulelang.hpp"
#include "adaptron/simbus.hpp"

namespace {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("ADAPTRON_LOG_LEVEL");
    std::string v = env ? env : "warn";
    if (v == "error") return LogLevel::Error;
    if (v == "info") return LogLevel::Info;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Warn;
  }();
  return level;
}

void diag(LogLevel level, const std::string& message) {
  if (level <= log_level()) std::cerr << message << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::set<std::string> pipeline_nodes(const adaptron::ScenarioConfig& scenario) {
  adaptron::PerceptionSystem system(scenario, false);
  std::set<std::string> nodes;
  for (const auto& name : system.bus().node_order()) nodes.insert(name);
  return nodes;
}

/// Returns the parsed rule set or nullopt after printing diagnostics.
std::optional<adaptron::RuleSet> lint_rules(const std::string& rules_path,
                                            const std::set<std::string>& declared_nodes) {
  adaptron::RuleSet rules;
  try {
    rules = adaptron::parse_ruleset(read_file(rules_path));
  } catch (const adaptron::ParseError& e) {
    std::cout << rules_path << ":" << e.line << ":" << e.column << ": error: " << e.what()
              << "\n";
    return std::nullopt;
  }

  bool errors = false;
  for (const auto& d : adaptron::validate_ruleset(rules, declared_nodes)) {
    const bool is_error = d.severity == adaptron::LintDiagnostic::Severity::Error;
    errors = errors || is_error;
    std::cout << rules_path << ":" << d.line << ":" << d.column << ": "
              << (is_error ? "error" : "warning") << ": ";
    if (!d.rule.empty()) std::cout << "[" << d.rule << (d.strategy.empty() ? "" : "/" + d.strategy)
                                   << "] ";
    std::cout << d.message << "\n";
  }
  if (errors) return std::nullopt;
  return rules;
}

void print_metrics(const adaptron::RunResult& result) {
  std::cout << "status: " << result.status << "\n"
            << "ticks: " << result.ticks_used << "\n"
            << "dispatched_strategies: " << result.metrics.dispatched_strategies << "\n"
            << "resolved_episodes: " << result.metrics.resolved_episodes << "\n"
            << "resolution_ratio: "
            << (result.metrics.resolution_ratio
                    ? adaptron::value_to_string(*result.metrics.resolution_ratio)
                    : "n/a")
            << "\n"
            << "unnecessary_redeploys: " << result.metrics.unnecessary_redeploys << "\n"
            << "mean_reaction_s: " << adaptron::value_to_string(result.metrics.mean_reaction_s)
            << "\n"
            << "max_downtime_s: " << adaptron::value_to_string(result.metrics.max_downtime_s)
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-adaptive manager for the simulated perception pipeline"};
  app.require_subcommand(1);

  std::string rules_path, scenario_path, combo_name, log_path, out_path;
  unsigned long long seed = 0, seed0 = 0;
  int reps = 9, jobs = 1, tick_ms_override = 0;
  bool dep_graph = true, criticality = true, system_impact = true;

  auto* lint = app.add_subcommand("lint", "Check a rule file for errors");
  lint->add_option("rules", rules_path, "Rule file")->required();
  lint->add_option("--scenario", scenario_path, "Scenario file for node-name checking");

  auto* run = app.add_subcommand("run", "Run one fault combo through the adaptation loop");
  run->add_option("rules", rules_path, "Rule file")->required();
  run->add_option("scenario", scenario_path, "Scenario file")->required();
  run->add_option("--combo", combo_name, "Fault combo name (see --list-combos)");
  run->add_flag("--list-combos", "List combo names and exit");
  run->add_option("--seed", seed, "Run seed");
  run->add_option("--dep-graph", dep_graph, "Use the dependency graph (on/off)");
  run->add_option("--criticality", criticality, "Use criticality pools (on/off)");
  run->add_option("--system-impact", system_impact, "Use the impact cost term (on/off)");
  run->add_option("--tick-ms", tick_ms_override, "Override tick duration for reports");
  run->add_option("--log", log_path, "Write the event log (NDJSON) here");

  auto* ablate = app.add_subcommand("ablate", "Run the 8-config ablation sweep");
  ablate->add_option("rules", rules_path, "Rule file")->required();
  ablate->add_option("scenario", scenario_path, "Scenario file")->required();
  ablate->add_option("--reps", reps, "Repetitions per combo (default 9)");
  ablate->add_option("--seed0", seed0, "First seed");
  ablate->add_option("--out", out_path, "Output directory for runs.csv and summary.json");
  ablate->add_option("--jobs", jobs, "Worker threads");

  auto* graph = app.add_subcommand("graph", "Dump the healthy pipeline topology as DOT");
  graph->add_option("scenario", scenario_path, "Scenario file")->required();
  graph->add_option("--out", out_path, "Write DOT here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (lint->parsed()) {
      std::set<std::string> nodes;
      if (!scenario_path.empty())
        nodes = pipeline_nodes(adaptron::load_scenario_file(scenario_path));
      else
        nodes = pipeline_nodes(adaptron::ScenarioConfig{});
      auto rules = lint_rules(rules_path, nodes);
      if (!rules) return 1;
      diag(LogLevel::Info, "lint clean: " + std::to_string(rules->rules.size()) + " rules");
      return 0;
    }

    if (run->parsed()) {
      if (run->count("--list-combos")) {
        for (const auto& combo : adaptron::enumerate_combos()) std::cout << combo.name << "\n";
        return 0;
      }
      adaptron::ScenarioConfig scenario = adaptron::load_scenario_file(scenario_path);
      if (tick_ms_override > 0) scenario.tick_ms = tick_ms_override;
      auto rules = lint_rules(rules_path, pipeline_nodes(scenario));
      if (!rules) return 1;

      adaptron::RunSpec spec;
      spec.scenario = scenario;
      spec.rules = *rules;
      spec.planner = {dep_graph, criticality, system_impact};
      spec.seed = seed;
      bool found = false;
      for (const auto& combo : adaptron::enumerate_combos())
        if (combo.name == combo_name) {
          spec.combo = combo;
          found = true;
        }
      if (!found) {
        std::cerr << "unknown combo '" << combo_name << "'; use --list-combos\n";
        return 2;
      }

      diag(LogLevel::Info, "running combo " + combo_name + " under config " +
                               adaptron::config_name(spec.planner));
      adaptron::RunResult result = adaptron::run_scenario(spec);
      if (!log_path.empty()) {
        std::ofstream out(log_path, std::ios::binary);
        out << adaptron::to_ndjson(result.log);
      }
      print_metrics(result);
      return result.status == "all_resolved" ? 0 : 1;
    }

    if (ablate->parsed()) {
      adaptron::ScenarioConfig scenario = adaptron::load_scenario_file(scenario_path);
      auto rules = lint_rules(rules_path, pipeline_nodes(scenario));
      if (!rules) return 1;

      diag(LogLevel::Info, "ablation: 8 configs x 18 combos x " + std::to_string(reps) +
                               " reps");
      adaptron::AblationReport report =
          adaptron::run_ablation(scenario, *rules, reps, seed0, jobs);

      std::string csv = adaptron::ablation_csv(report);
      std::string summary = adaptron::ablation_summary_json(report);
      if (!out_path.empty()) {
        std::filesystem::create_directories(out_path);
        std::ofstream(out_path + "/runs.csv", std::ios::binary) << csv;
        std::ofstream(out_path + "/summary.json", std::ios::binary) << summary;
      }
      std::cout << summary;
      return 0;
    }

    if (graph->parsed()) {
      adaptron::ScenarioConfig scenario = adaptron::load_scenario_file(scenario_path);
      adaptron::PerceptionSystem system(scenario, false);
      adaptron::DependencyGraph g;
      g.upsert_topology(system.bus().introspect());
      std::string dot = g.to_dot();
      if (!out_path.empty())
        std::ofstream(out_path, std::ios::binary) << dot;
      else
        std::cout << dot;
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
