#include "adaptron/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace adaptron {

std::vector<FaultCombo> enumerate_combos() {
  const std::vector<FaultKind> outages = {
      {FaultType::OutageRestartable, "camera_rgb"},
      {FaultType::OutageRestartable, "sensor_fusion"},
      {FaultType::OutageRestartable, "segmentation"},
      {FaultType::OutageRedeployOnly, "camera_rgb"},
      {FaultType::OutageRedeployOnly, "sensor_fusion"},
      {FaultType::OutageRedeployOnly, "segmentation"},
  };
  const std::vector<FaultType> quality = {FaultType::Misalignment, FaultType::Degradation,
                                          FaultType::StaleEnhancement};

  std::vector<FaultCombo> combos;
  for (const auto& outage : outages) {
    for (FaultType q : quality) {
      FaultCombo combo;
      combo.name = std::string(to_string(outage.type)) + ":" + outage.node + "+" + to_string(q);
      combo.faults = {outage, {q, ""}, {FaultType::Defocus, ""}};
      combos.push_back(std::move(combo));
    }
  }
  return combos;
}

std::vector<PlannerConfig> all_planner_configs() {
  std::vector<PlannerConfig> configs;
  for (int g = 1; g >= 0; --g)
    for (int c = 1; c >= 0; --c)
      for (int s = 1; s >= 0; --s) configs.push_back({g != 0, c != 0, s != 0});
  return configs;
}

std::string config_name(const PlannerConfig& config) {
  std::string name;
  name += config.use_dependency_graph ? 'D' : '-';
  name += config.use_criticality ? 'C' : '-';
  name += config.use_system_impact ? 'S' : '-';
  return name;
}

std::vector<FaultInjection> schedule_faults(const FaultCombo& combo, int base_tick,
                                            unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> jitter(0, 2);
  std::vector<FaultInjection> schedule;
  for (const auto& kind : combo.faults) {
    FaultInjection injection;
    injection.kind = kind;
    injection.inject_tick = base_tick + jitter(rng);
    schedule.push_back(injection);
  }
  return schedule;
}

RunResult run_scenario(const RunSpec& spec) {
  ScenarioConfig scenario = spec.scenario;
  scenario.seed = spec.seed;
  scenario.fault_schedule = schedule_faults(spec.combo, scenario.inject_base_tick, spec.seed);

  bool enhancement_active = false;
  for (const auto& fault : scenario.fault_schedule)
    if (fault.kind.type == FaultType::StaleEnhancement) enhancement_active = true;

  PerceptionSystem system(scenario, enhancement_active);
  MonitorConfig monitor{scenario.monitored_topics, scenario.monitor_window_ticks,
                        scenario.tick_ms};
  Engine engine(system.bus(), spec.rules, spec.planner, monitor);

  int ticks_used = 0;
  for (int tick = 0; tick < scenario.tick_budget; ++tick) {
    system.advance_tick();
    engine.run_cycle();
    ticks_used = tick + 1;
    if (system.all_injected_faults_cleared() && !engine.any_open_symptom()) break;
  }

  RunResult result;
  result.ticks_used = ticks_used;
  if (system.all_injected_faults_cleared() && !engine.any_open_symptom())
    result.status = "all_resolved";
  else if (engine.any_open_exhausted())
    result.status = "exhausted";
  else
    result.status = "timeout";

  system.bus().log("run_finished",
                   {{"status", result.status}, {"ticks", std::to_string(ticks_used)}});
  result.log = system.bus().run_log();
  result.metrics = compute_metrics(result.log, scenario.tick_ms);
  return result;
}

RunMetrics compute_metrics(const RunLog& log, int tick_ms) {
  RunMetrics m;
  const double tick_s = tick_ms / 1000.0;

  std::set<std::string> crashed;  // nodes with an uncleared redeploy-only outage
  std::map<std::string, int> detected_at;          // symptom id -> tick
  std::map<std::string, int> last_dispatch_at;     // symptom id -> tick
  std::vector<int> reaction_ticks;
  int last_segmentation_tick = -1;
  int max_gap = 0;

  for (const auto& event : log) {
    if (event.kind == "publish") {
      if (event.fields.at("topic") == "segmentation") {
        if (last_segmentation_tick >= 0)
          max_gap = std::max(max_gap, event.tick - last_segmentation_tick);
        last_segmentation_tick = event.tick;
      }
    } else if (event.kind == "fault_injected") {
      if (event.fields.at("type") == "outage_redeploy_only") crashed.insert(event.fields.at("node"));
    } else if (event.kind == "fault_cleared") {
      if (event.fields.at("type") == "outage_redeploy_only") crashed.erase(event.fields.at("node"));
    } else if (event.kind == "symptom_detected") {
      detected_at[event.fields.at("id")] = event.tick;
    } else if (event.kind == "strategy_dispatched") {
      ++m.dispatched_strategies;
      last_dispatch_at[event.fields.at("id")] = event.tick;
    } else if (event.kind == "service_call") {
      // a redeploy against anything but an actual crash is overkill: some
      // cheaper strategy (or just waiting) would have recovered the node
      if (event.fields.at("kind") == "redeploy" && event.fields.at("ok") == "true" &&
          !crashed.count(event.fields.at("node")))
        ++m.unnecessary_redeploys;
    } else if (event.kind == "symptom_resolved") {
      ++m.resolved_episodes;
      if (event.fields.at("how") == "strategy") {
        const std::string& id = event.fields.at("id");
        if (detected_at.count(id) && last_dispatch_at.count(id))
          reaction_ticks.push_back(last_dispatch_at[id] - detected_at[id]);
      }
    }
  }

  if (m.dispatched_strategies > 0)
    m.resolution_ratio = static_cast<double>(m.resolved_episodes) / m.dispatched_strategies;
  if (!reaction_ticks.empty()) {
    double sum = 0;
    for (int t : reaction_ticks) sum += t;
    m.mean_reaction_s = sum / reaction_ticks.size() * tick_s;
  }
  m.max_downtime_s = max_gap * tick_s;
  return m;
}

namespace {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd result;
  if (values.empty()) return result;
  for (double v : values) result.mean += v;
  result.mean /= values.size();
  double var = 0.0;
  for (double v : values) var += (v - result.mean) * (v - result.mean);
  result.std = std::sqrt(var / values.size());
  return result;
}

std::vector<AblationRow> run_config(const ScenarioConfig& scenario, const RuleSet& rules,
                                    const PlannerConfig& planner,
                                    const std::vector<FaultCombo>& combos, int reps,
                                    unsigned long long seed0) {
  std::vector<AblationRow> rows;
  for (const auto& combo : combos) {
    for (int rep = 0; rep < reps; ++rep) {
      RunSpec spec{scenario, rules, planner, combo,
                   seed0 + static_cast<unsigned long long>(rep)};
      RunResult result = run_scenario(spec);

      AblationRow row;
      row.config = config_name(planner);
      row.combo = combo.name;
      row.seed = spec.seed;
      row.status = result.status;
      row.ticks_used = result.ticks_used;
      row.metrics = result.metrics;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace

AblationReport run_ablation(const ScenarioConfig& scenario, const RuleSet& rules, int reps,
                            unsigned long long seed0, int jobs) {
  const auto combos = enumerate_combos();
  const auto configs = all_planner_configs();
  std::vector<std::vector<AblationRow>> per_config(configs.size());

  if (jobs <= 1) {
    for (std::size_t i = 0; i < configs.size(); ++i)
      per_config[i] = run_config(scenario, rules, configs[i], combos, reps, seed0);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < configs.size(); i = next++)
        per_config[i] = run_config(scenario, rules, configs[i], combos, reps, seed0);
    };
    std::vector<std::thread> pool;
    int n = std::min<int>(jobs, static_cast<int>(configs.size()));
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  AblationReport report;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    AblationAggregate agg;
    agg.config = config_name(configs[i]);
    std::vector<double> ratios, redeploys, reactions, downtimes;
    for (const auto& row : per_config[i]) {
      ++agg.runs;
      if (row.status == "all_resolved") ++agg.all_resolved;
      if (row.metrics.resolution_ratio) ratios.push_back(*row.metrics.resolution_ratio);
      redeploys.push_back(row.metrics.unnecessary_redeploys);
      reactions.push_back(row.metrics.mean_reaction_s);
      downtimes.push_back(row.metrics.max_downtime_s);
      report.rows.push_back(row);
    }
    auto r = mean_std(ratios);
    agg.mean_ratio = r.mean;
    agg.std_ratio = r.std;
    auto u = mean_std(redeploys);
    agg.mean_unnecessary_redeploys = u.mean;
    agg.std_unnecessary_redeploys = u.std;
    auto t = mean_std(reactions);
    agg.mean_reaction_s = t.mean;
    agg.std_reaction_s = t.std;
    auto d = mean_std(downtimes);
    agg.mean_downtime_s = d.mean;
    agg.std_downtime_s = d.std;
    report.aggregates.push_back(std::move(agg));
  }
  return report;
}

std::string ablation_csv(const AblationReport& report) {
  std::ostringstream out;
  out << "config,combo,seed,status,ticks,dispatched,resolved,ratio,unnecessary_redeploys,"
         "mean_reaction_s,max_downtime_s\n";
  for (const auto& row : report.rows) {
    out << row.config << ',' << row.combo << ',' << row.seed << ',' << row.status << ','
        << row.ticks_used << ',' << row.metrics.dispatched_strategies << ','
        << row.metrics.resolved_episodes << ','
        << (row.metrics.resolution_ratio ? value_to_string(*row.metrics.resolution_ratio)
                                         : std::string{})
        << ',' << row.metrics.unnecessary_redeploys << ','
        << value_to_string(row.metrics.mean_reaction_s) << ','
        << value_to_string(row.metrics.max_downtime_s) << '\n';
  }
  return out.str();
}

std::string ablation_summary_json(const AblationReport& report) {
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& agg : report.aggregates) {
    summary.push_back({{"config", agg.config},
                       {"runs", agg.runs},
                       {"all_resolved", agg.all_resolved},
                       {"mean_ratio", agg.mean_ratio},
                       {"std_ratio", agg.std_ratio},
                       {"mean_unnecessary_redeploys", agg.mean_unnecessary_redeploys},
                       {"std_unnecessary_redeploys", agg.std_unnecessary_redeploys},
                       {"mean_reaction_s", agg.mean_reaction_s},
                       {"std_reaction_s", agg.std_reaction_s},
                       {"mean_downtime_s", agg.mean_downtime_s},
                       {"std_downtime_s", agg.std_downtime_s}});
  }
  return summary.dump(2) + "\n";
}

}  // namespace adaptron
