#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adaptron/mapek.hpp"
#include "adaptron/simbus.hpp"

namespace adaptron {

/// One fault mix for a run: an ERROR-class outage, a WARNING-class quality
/// fault, and a defocus event.
struct FaultCombo {
  std::string name;
  std::vector<FaultKind> faults;
};

/// The 6 outage variants x 3 quality faults, defocus always included: 18.
std::vector<FaultCombo> enumerate_combos();

/// The 8 planner configurations, full config first. Names look like "DCS",
/// with "-" for a disabled dimension (dep graph, criticality, impact).
std::vector<PlannerConfig> all_planner_configs();
std::string config_name(const PlannerConfig& config);

struct RunSpec {
  ScenarioConfig scenario;  // fault_schedule is filled in by run_scenario
  RuleSet rules;
  PlannerConfig planner;
  FaultCombo combo;
  unsigned long long seed = 0;
};

struct RunMetrics {
  int dispatched_strategies = 0;
  int resolved_episodes = 0;
  std::optional<double> resolution_ratio;  // resolved / dispatched; absent when
                                           // nothing was dispatched
  int unnecessary_redeploys = 0;  // redeploys where a cheaper strategy would have done
  double mean_reaction_s = 0.0;   // detection to dispatch of the resolving strategy
  double max_downtime_s = 0.0;    // longest gap in segmentation output
};

struct RunResult {
  std::string status;  // all_resolved | exhausted | timeout
  int ticks_used = 0;
  RunMetrics metrics;
  RunLog log;
};

/// Fault injection ticks: base + per-fault jitter in [0, 2] drawn from the
/// run seed.
std::vector<FaultInjection> schedule_faults(const FaultCombo& combo, int base_tick,
                                            unsigned long long seed);

RunResult run_scenario(const RunSpec& spec);

/// Everything here is reconstructed from the event log alone.
RunMetrics compute_metrics(const RunLog& log, int tick_ms);

struct AblationRow {
  std::string config;
  std::string combo;
  unsigned long long seed = 0;
  std::string status;
  int ticks_used = 0;
  RunMetrics metrics;
};

struct AblationAggregate {
  std::string config;
  int runs = 0;
  int all_resolved = 0;
  double mean_ratio = 0.0;
  double std_ratio = 0.0;
  double mean_unnecessary_redeploys = 0.0;
  double std_unnecessary_redeploys = 0.0;
  double mean_reaction_s = 0.0;
  double std_reaction_s = 0.0;
  double mean_downtime_s = 0.0;
  double std_downtime_s = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::vector<AblationAggregate> aggregates;  // one per config, config order
};

/// Runs 8 configs x 18 combos x reps. Configs fan out over up to `jobs`
/// worker threads; the report is assembled in config order regardless.
AblationReport run_ablation(const ScenarioConfig& scenario, const RuleSet& rules, int reps,
                            unsigned long long seed0, int jobs = 1);

std::string ablation_csv(const AblationReport& report);
std::string ablation_summary_json(const AblationReport& report);

}  // namespace adaptron
