#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "adaptron/knowledge.hpp"
#include "adaptron/rulelang.hpp"
#include "adaptron/simbus.hpp"

namespace adaptron {

/// The ablation switches. All three on is the full planner.
struct PlannerConfig {
  bool use_dependency_graph = true;
  bool use_criticality = true;
  bool use_system_impact = true;
};

struct MonitorConfig {
  std::vector<std::string> topics;  // frequency and staleness are estimated per topic
  int window_ticks = 10;
  int tick_ms = 100;
};

enum class SymptomState { AwaitingPlan, StrategyInFlight, Resolved, Exhausted, Closed };

const char* to_string(SymptomState state);

/// One episode of a triggered rule, from detection to resolution (or until it
/// runs out of strategies).
struct SymptomInstance {
  int id = 0;
  std::string rule;
  CriticalityLevel level = CriticalityLevel::OK;
  int detected_tick = 0;
  SymptomState state = SymptomState::AwaitingPlan;
  std::set<std::string> tried;  // strategy names already attempted this episode
  std::string in_flight_strategy;
  std::set<std::string> in_flight_nodes;
  int dispatch_tick = -1;
  int deadline_tick = -1;  // in flight: dispatch + strategy impact
  int closed_tick = -1;

  bool open() const { return state != SymptomState::Resolved && state != SymptomState::Closed; }
};

/// Expected failure cost of a strategy: (100 - p) / 100, plus impact / i_max
/// when the impact term is enabled.
double strategy_cost(const Strategy& strategy, int i_max, bool use_system_impact);

/// The managing system. One run_cycle per simulation tick: monitor refreshes
/// the knowledge base, analyze tracks symptom episodes, plan picks the
/// cheapest applicable strategy per symptom, execute dispatches it.
class Engine {
 public:
  Engine(Bus& bus, RuleSet rules, PlannerConfig planner, MonitorConfig monitor);

  void run_cycle();

  KnowledgeBase& knowledge() { return kb_; }
  const KnowledgeBase& knowledge() const { return kb_; }
  const std::vector<SymptomInstance>& symptoms() const { return symptoms_; }
  const PlannerConfig& planner_config() const { return planner_; }

  bool any_open_symptom() const;
  bool any_open_exhausted() const;

  // stages are public for focused testing; run_cycle calls them in order
  void monitor_tick();
  void analyze_tick();
  void plan_tick();

 private:
  struct Candidate {
    int symptom_index = 0;
    int rule_index = 0;
    int strategy_index = 0;
    double cost = 0.0;
  };

  bool trigger_holds(const Rule& rule) const;
  bool strategy_valid(const Strategy& strategy) const;
  void resolve_symptom(SymptomInstance& symptom, const std::string& how);
  void fail_in_flight(SymptomInstance& symptom, const std::string& how);
  void release_claims(SymptomInstance& symptom);
  void plan_pool(std::vector<Candidate> pool, std::set<std::string>& claimed);
  bool execute_strategy(SymptomInstance& symptom, const Rule& rule, const Strategy& strategy,
                        double cost);
  SymptomInstance* open_symptom_for(const std::string& rule);

  Bus& bus_;
  KnowledgeBase kb_;
  PlannerConfig planner_;
  MonitorConfig monitor_;
  std::vector<SymptomInstance> symptoms_;
  int next_symptom_id_ = 1;
};

}  // namespace adaptron
