#include "adaptron/mapek.hpp"

#include <algorithm>
#include <tuple>

namespace adaptron {

const char* to_string(SymptomState state) {
  switch (state) {
    case SymptomState::AwaitingPlan: return "awaiting_plan";
    case SymptomState::StrategyInFlight: return "strategy_in_flight";
    case SymptomState::Resolved: return "resolved";
    case SymptomState::Exhausted: return "exhausted";
    case SymptomState::Closed: return "closed";
  }
  return "?";
}

double strategy_cost(const Strategy& strategy, int i_max, bool use_system_impact) {
  double cost = (100.0 - strategy.success_probability) / 100.0;
  if (use_system_impact) cost += static_cast<double>(strategy.impact()) / i_max;
  return cost;
}

Engine::Engine(Bus& bus, RuleSet rules, PlannerConfig planner, MonitorConfig monitor)
    : bus_(bus), planner_(planner), monitor_(std::move(monitor)) {
  kb_.rules = std::move(rules);
}

void Engine::run_cycle() {
  monitor_tick();
  analyze_tick();
  plan_tick();  // execute is folded into planning: a chosen strategy is
                // dispatched immediately
}

void Engine::monitor_tick() {
  GraphDelta delta = kb_.graph.upsert_topology(bus_.introspect());
  if (!delta.empty())
    bus_.log("graph_updated",
             {{"nodes_added", std::to_string(delta.added_nodes.size())},
              {"nodes_removed", std::to_string(delta.removed_nodes.size())},
              {"edges_added", std::to_string(delta.added_edges.size())},
              {"edges_removed", std::to_string(delta.removed_edges.size())}});

  const int tick = bus_.current_tick();
  const double window_s = monitor_.window_ticks * monitor_.tick_ms / 1000.0;
  for (const auto& topic : monitor_.topics) {
    int count = bus_.publish_count_since(topic, tick - monitor_.window_ticks + 1);
    kb_.state.set(topic + ".frequency", count / window_s, tick);
    kb_.state.set(topic + ".staleness", static_cast<std::int64_t>(bus_.staleness(topic)), tick);
  }
  for (const auto& [key, value] : bus_.diagnostics_this_tick()) kb_.state.set(key, value, tick);
}

bool Engine::trigger_holds(const Rule& rule) const {
  try {
    Value v = eval_expression(rule.trigger, kb_.state);
    const bool* b = std::get_if<bool>(&v);
    return b && *b;
  } catch (const EvalError&) {
    // missing inputs or type mismatches read as "not triggered"
    return false;
  }
}

SymptomInstance* Engine::open_symptom_for(const std::string& rule) {
  for (auto& s : symptoms_)
    if (s.rule == rule && s.open()) return &s;
  return nullptr;
}

void Engine::analyze_tick() {
  const int tick = bus_.current_tick();
  for (const auto& rule : kb_.rules.rules) {
    const bool holds = trigger_holds(rule);
    SymptomInstance* open = open_symptom_for(rule.name);

    if (!open) {
      if (!holds) continue;
      SymptomInstance symptom;
      symptom.id = next_symptom_id_++;
      symptom.rule = rule.name;
      symptom.level = rule.criticality;
      symptom.detected_tick = tick;
      kb_.mark_rule_suspects(rule, true);
      bus_.log("symptom_detected", {{"id", std::to_string(symptom.id)},
                                    {"rule", rule.name},
                                    {"level", to_string(rule.criticality)}});
      symptoms_.push_back(std::move(symptom));
      continue;
    }

    switch (open->state) {
      case SymptomState::AwaitingPlan:
        if (!holds) resolve_symptom(*open, "self");
        break;
      case SymptomState::StrategyInFlight:
        if (!holds)
          resolve_symptom(*open, "strategy");
        else if (tick >= open->deadline_tick)
          fail_in_flight(*open, "timeout");
        break;
      case SymptomState::Exhausted:
        // parked; the rule re-arms once its trigger drops
        if (!holds) {
          open->state = SymptomState::Closed;
          open->closed_tick = tick;
          if (const Rule* r = kb_.rules.find_rule(open->rule)) kb_.mark_rule_suspects(*r, false);
          bus_.log("symptom_closed",
                   {{"id", std::to_string(open->id)}, {"rule", open->rule}});
        }
        break;
      default:
        break;
    }
  }
}

void Engine::resolve_symptom(SymptomInstance& symptom, const std::string& how) {
  std::map<std::string, std::string> fields{
      {"id", std::to_string(symptom.id)}, {"rule", symptom.rule}, {"how", how}};
  if (how == "strategy") fields["strategy"] = symptom.in_flight_strategy;
  release_claims(symptom);
  symptom.state = SymptomState::Resolved;
  symptom.closed_tick = bus_.current_tick();
  if (const Rule* r = kb_.rules.find_rule(symptom.rule)) kb_.mark_rule_suspects(*r, false);
  bus_.log("symptom_resolved", std::move(fields));
}

void Engine::fail_in_flight(SymptomInstance& symptom, const std::string& how) {
  bus_.log("strategy_failed", {{"id", std::to_string(symptom.id)},
                               {"rule", symptom.rule},
                               {"strategy", symptom.in_flight_strategy},
                               {"how", how}});
  symptom.tried.insert(symptom.in_flight_strategy);
  release_claims(symptom);
  symptom.in_flight_strategy.clear();
  symptom.state = SymptomState::AwaitingPlan;
}

void Engine::release_claims(SymptomInstance& symptom) {
  for (const auto& name : symptom.in_flight_nodes)
    if (ManagedNodeInfo* node = kb_.graph.find(name)) node->currently_adapted = false;
  symptom.in_flight_nodes.clear();
}

bool Engine::strategy_valid(const Strategy& strategy) const {
  std::map<std::string, Lifecycle> projected;
  for (const auto& a : strategy.adaptations) {
    const ManagedNodeInfo* info = kb_.graph.find(a.target);
    if (!info) return false;
    auto [it, fresh] = projected.try_emplace(a.target, info->lifecycle);
    (void)fresh;
    Lifecycle& lc = it->second;
    switch (a.kind) {
      case AdaptationKind::Activate:
        if (lc != Lifecycle::INACTIVE) return false;
        lc = Lifecycle::ACTIVE;
        break;
      case AdaptationKind::Deactivate:
        if (lc != Lifecycle::ACTIVE) return false;
        lc = Lifecycle::INACTIVE;
        break;
      case AdaptationKind::Redeploy:
        lc = Lifecycle::ACTIVE;
        break;
      case AdaptationKind::Reparametrize:
        if (lc != Lifecycle::ACTIVE) return false;
        break;
      case AdaptationKind::CommunicationChange: {
        if (lc != Lifecycle::ACTIVE) return false;
        // rebinding to the topic the node already consumes is a no-op
        for (const auto& [pub, topic, sub] : kb_.graph.edges()) {
          (void)pub;
          if (sub == a.target && topic == a.new_topic) return false;
        }
        break;
      }
      case AdaptationKind::ModeChange:
        if (lc == Lifecycle::FINALIZED) return false;
        break;
    }
  }
  return true;
}

void Engine::plan_tick() {
  // a symptom whose rule has no strategies left is out of options
  for (auto& symptom : symptoms_) {
    if (symptom.state != SymptomState::AwaitingPlan) continue;
    const Rule* rule = kb_.rules.find_rule(symptom.rule);
    if (!rule) continue;
    bool any_untried = false;
    for (const auto& s : rule->strategies)
      if (!symptom.tried.count(s.name)) any_untried = true;
    if (!any_untried) {
      symptom.state = SymptomState::Exhausted;
      bus_.log("symptom_exhausted",
               {{"id", std::to_string(symptom.id)}, {"rule", symptom.rule}});
    }
  }

  const int i_max = kb_.rules.i_max();
  std::vector<Candidate> pools[3];  // indexed by CriticalityLevel
  for (int si = 0; si < static_cast<int>(symptoms_.size()); ++si) {
    const SymptomInstance& symptom = symptoms_[si];
    if (symptom.state != SymptomState::AwaitingPlan) continue;
    for (int ri = 0; ri < static_cast<int>(kb_.rules.rules.size()); ++ri) {
      const Rule& rule = kb_.rules.rules[ri];
      if (rule.name != symptom.rule) continue;
      for (int ti = 0; ti < static_cast<int>(rule.strategies.size()); ++ti) {
        if (symptom.tried.count(rule.strategies[ti].name)) continue;
        Candidate c{si, ri, ti, strategy_cost(rule.strategies[ti], i_max,
                                              planner_.use_system_impact)};
        int pool = planner_.use_criticality ? static_cast<int>(symptom.level) : 0;
        pools[pool].push_back(c);
      }
    }
  }

  std::set<std::string> claimed;
  // higher-criticality symptoms plan first
  for (int pool = 2; pool >= 0; --pool) plan_pool(std::move(pools[pool]), claimed);
}

void Engine::plan_pool(std::vector<Candidate> pool, std::set<std::string>& claimed) {
  std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.cost, a.rule_index, a.strategy_index) <
           std::tie(b.cost, b.rule_index, b.strategy_index);
  });

  for (const Candidate& c : pool) {
    SymptomInstance& symptom = symptoms_[c.symptom_index];
    if (symptom.state != SymptomState::AwaitingPlan) continue;
    const Rule& rule = kb_.rules.rules[c.rule_index];
    const Strategy& strategy = rule.strategies[c.strategy_index];
    if (symptom.tried.count(strategy.name)) continue;

    std::set<std::string> nodes = strategy.affected_nodes();
    bool blocked = false;
    for (const auto& name : nodes) {
      const ManagedNodeInfo* info = kb_.graph.find(name);
      if ((info && info->currently_adapted) || claimed.count(name)) blocked = true;
    }
    if (blocked) continue;

    bool deferred = false;
    if (planner_.use_dependency_graph) {
      for (const auto& name : nodes)
        if (kb_.graph.relevant_dependencies_present(name, symptom.level, symptom.rule))
          deferred = true;
    }
    if (deferred) continue;

    if (!strategy_valid(strategy)) continue;

    claimed.insert(nodes.begin(), nodes.end());
    if (!execute_strategy(symptom, rule, strategy, c.cost)) {
      // service rejection: free the nodes so a fallback can run this tick
      for (const auto& name : nodes) claimed.erase(name);
    }
  }
}

bool Engine::execute_strategy(SymptomInstance& symptom, const Rule& rule,
                              const Strategy& strategy, double cost) {
  bus_.log("strategy_dispatched", {{"id", std::to_string(symptom.id)},
                                   {"rule", rule.name},
                                   {"strategy", strategy.name},
                                   {"cost", value_to_string(cost)}});

  symptom.in_flight_nodes = strategy.affected_nodes();
  for (const auto& name : symptom.in_flight_nodes)
    if (ManagedNodeInfo* node = kb_.graph.find(name)) node->currently_adapted = true;

  for (const auto& adaptation : strategy.adaptations) {
    ServiceResult result = bus_.call_adaptation_service(adaptation, kb_.state);
    if (!result.ok) {
      bus_.log("strategy_failed", {{"id", std::to_string(symptom.id)},
                                   {"rule", rule.name},
                                   {"strategy", strategy.name},
                                   {"how", "service"},
                                   {"error", result.error}});
      symptom.tried.insert(strategy.name);
      release_claims(symptom);
      return false;
    }
  }

  symptom.in_flight_strategy = strategy.name;
  symptom.dispatch_tick = bus_.current_tick();
  symptom.deadline_tick = bus_.current_tick() + strategy.impact();
  symptom.state = SymptomState::StrategyInFlight;
  return true;
}

bool Engine::any_open_symptom() const {
  for (const auto& s : symptoms_)
    if (s.open()) return true;
  return false;
}

bool Engine::any_open_exhausted() const {
  for (const auto& s : symptoms_)
    if (s.state == SymptomState::Exhausted) return true;
  return false;
}

}  // namespace adaptron
