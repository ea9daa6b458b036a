#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "adaptron/mapek.hpp"

using namespace adaptron;

namespace {

std::vector<std::string> dispatched_strategies(const Bus& bus) {
  std::vector<std::string> names;
  for (const auto& e : bus.run_log())
    if (e.kind == "strategy_dispatched") names.push_back(e.fields.at("strategy"));
  return names;
}

bool event_logged(const Bus& bus, const std::string& kind, const std::string& field,
                  const std::string& value) {
  for (const auto& e : bus.run_log())
    if (e.kind == kind && e.fields.count(field) && e.fields.at(field) == value) return true;
  return false;
}

// one engine step against a hand-driven bus: advance, feed a diagnostic,
// then run the three loop stages
void step(Bus& bus, Engine& engine, double temp) {
  bus.advance_tick();
  bus.publish_diagnostic("probe", "temp", temp);
  engine.monitor_tick();
  engine.analyze_tick();
  engine.plan_tick();
}

}  // namespace

TEST_CASE("strategy cost combines failure odds and normalized impact") {
  RuleSet rs = parse_ruleset(
      "RULE r POLICIES OK\n  TRIGGER true\n"
      "  STRATEGY s 40\n    ADAPTATION n redeploy 1\n    ADAPTATION n activate 2\n"
      "  STRATEGY sure 100\n    ADAPTATION n redeploy 0\n");
  const Strategy& s = rs.rules[0].strategies[0];
  CHECK(s.impact() == 2);
  CHECK(strategy_cost(s, 5, false) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(strategy_cost(s, 5, true) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(strategy_cost(s, 2, true) == doctest::Approx(1.6).epsilon(1e-12));
  CHECK(strategy_cost(rs.rules[0].strategies[1], 5, true) == doctest::Approx(0.0));
}

TEST_CASE("frequency and staleness estimation") {
  Bus bus;
  SimNode pub;
  pub.name = "pub";
  pub.outputs = {"t"};
  pub.publish_period_ticks = 2;
  pub.behavior = [](Bus& b, SimNode& n) { b.publish(n.name, "t"); };
  bus.add_node(std::move(pub));

  Engine engine(bus, RuleSet{}, PlannerConfig{}, MonitorConfig{{"t", "silent"}, 10, 100});
  for (int i = 0; i < 15; ++i) {
    bus.advance_tick();
    engine.monitor_tick();
  }
  // window of 10 ticks at 100 ms holds 5 period-2 publications: 5.0 Hz
  CHECK(as_real(*engine.knowledge().state.get("t.frequency")) == doctest::Approx(5.0).epsilon(0.01));
  CHECK(as_real(*engine.knowledge().state.get("silent.frequency")) == doctest::Approx(0.0));
  CHECK(*engine.knowledge().state.get("t.staleness") == Value{std::int64_t{0}});
  CHECK(as_real(*engine.knowledge().state.get("silent.staleness")) > 1000);

  // one more tick without a publication
  bus.advance_tick();
  engine.monitor_tick();
  CHECK(*engine.knowledge().state.get("t.staleness") == Value{std::int64_t{1}});
}

TEST_CASE("symptom episode: detect, dispatch, resolve by strategy") {
  Bus bus;
  SimNode alpha;
  alpha.name = "alpha";
  alpha.parameters["fan"] = false;
  bus.add_node(std::move(alpha));

  RuleSet rules = parse_ruleset(
      "RULE Hot POLICIES WARNING\n  TRIGGER temp > 50\n"
      "  STRATEGY cool 80\n    ADAPTATION alpha set_parameter fan true 2\n"
      "  STRATEGY reboot 40\n    ADAPTATION alpha redeploy 3\n");
  Engine engine(bus, rules, PlannerConfig{}, MonitorConfig{{}, 10, 100});

  step(bus, engine, 60.0);
  REQUIRE(engine.symptoms().size() == 1);
  CHECK(engine.symptoms()[0].state == SymptomState::StrategyInFlight);
  CHECK(engine.symptoms()[0].in_flight_strategy == "cool");  // cheaper than reboot
  CHECK(engine.symptoms()[0].deadline_tick == 2);
  CHECK(engine.knowledge().graph.find("alpha")->suspected_at_least(CriticalityLevel::WARNING));
  CHECK(engine.knowledge().graph.find("alpha")->currently_adapted);

  step(bus, engine, 60.0);  // still within the deadline
  CHECK(engine.symptoms()[0].state == SymptomState::StrategyInFlight);

  step(bus, engine, 40.0);  // trigger drops: the strategy gets the credit
  CHECK(engine.symptoms()[0].state == SymptomState::Resolved);
  CHECK(event_logged(bus, "symptom_resolved", "how", "strategy"));
  CHECK(!engine.knowledge().graph.find("alpha")->suspected_at_least(CriticalityLevel::OK));
  CHECK(!engine.knowledge().graph.find("alpha")->currently_adapted);
  CHECK(!engine.any_open_symptom());
}

TEST_CASE("symptom episode: timeouts escalate, exhaust, close, re-arm") {
  Bus bus;
  SimNode alpha;
  alpha.name = "alpha";
  alpha.parameters["fan"] = false;
  alpha.default_parameters = alpha.parameters;  // survives the redeploy relaunch
  bus.add_node(std::move(alpha));

  RuleSet rules = parse_ruleset(
      "RULE Hot POLICIES WARNING\n  TRIGGER temp > 50\n"
      "  STRATEGY cool 80\n    ADAPTATION alpha set_parameter fan true 2\n"
      "  STRATEGY reboot 40\n    ADAPTATION alpha redeploy 3\n");
  Engine engine(bus, rules, PlannerConfig{}, MonitorConfig{{}, 10, 100});

  step(bus, engine, 60.0);  // tick 0: cool in flight, deadline 2
  step(bus, engine, 60.0);  // tick 1
  step(bus, engine, 60.0);  // tick 2: cool times out, reboot in flight, deadline 5
  CHECK(event_logged(bus, "strategy_failed", "how", "timeout"));
  CHECK(engine.symptoms()[0].in_flight_strategy == "reboot");
  CHECK(engine.symptoms()[0].deadline_tick == 5);

  step(bus, engine, 60.0);  // 3
  step(bus, engine, 60.0);  // 4
  step(bus, engine, 60.0);  // tick 5: reboot times out, no strategies left
  CHECK(engine.symptoms()[0].state == SymptomState::Exhausted);
  CHECK(engine.any_open_exhausted());
  CHECK(event_logged(bus, "symptom_exhausted", "rule", "Hot"));

  step(bus, engine, 40.0);  // trigger drops: the episode closes
  CHECK(engine.symptoms()[0].state == SymptomState::Closed);
  CHECK(!engine.any_open_symptom());
  CHECK(!engine.knowledge().graph.find("alpha")->suspected_at_least(CriticalityLevel::OK));

  step(bus, engine, 60.0);  // a fresh episode starts with a clean tried set
  REQUIRE(engine.symptoms().size() == 2);
  CHECK(engine.symptoms()[1].state == SymptomState::StrategyInFlight);
  CHECK(engine.symptoms()[1].in_flight_strategy == "cool");
}

TEST_CASE("invalid strategies are skipped, not burned") {
  Bus bus;
  SimNode alpha;
  alpha.name = "alpha";  // ACTIVE, so plain activation is impossible
  bus.add_node(std::move(alpha));

  RuleSet rules = parse_ruleset(
      "RULE Hot POLICIES WARNING\n  TRIGGER temp > 50\n"
      "  STRATEGY wake 90\n    ADAPTATION alpha activate 1\n");
  Engine engine(bus, rules, PlannerConfig{}, MonitorConfig{{}, 10, 100});

  step(bus, engine, 60.0);
  step(bus, engine, 60.0);
  CHECK(engine.symptoms()[0].state == SymptomState::AwaitingPlan);
  CHECK(engine.symptoms()[0].tried.empty());
  CHECK(dispatched_strategies(bus).empty());

  step(bus, engine, 40.0);  // cleared on its own
  CHECK(engine.symptoms()[0].state == SymptomState::Resolved);
  CHECK(event_logged(bus, "symptom_resolved", "how", "self"));
}

TEST_CASE("a failed service call burns the strategy immediately") {
  Bus bus;
  SimNode alpha;
  alpha.name = "alpha";
  bus.add_node(std::move(alpha));

  // the parameter does not exist, so dispatch fails at the service
  RuleSet rules = parse_ruleset(
      "RULE Hot POLICIES WARNING\n  TRIGGER temp > 50\n"
      "  STRATEGY cool 80\n    ADAPTATION alpha set_parameter fan true 2\n"
      "  STRATEGY reboot 40\n    ADAPTATION alpha redeploy 3\n");
  Engine engine(bus, rules, PlannerConfig{}, MonitorConfig{{}, 10, 100});

  step(bus, engine, 60.0);
  CHECK(event_logged(bus, "strategy_failed", "how", "service"));
  CHECK(engine.symptoms()[0].tried.count("cool") == 1);
  // planning moves on within the same tick
  CHECK(engine.symptoms()[0].in_flight_strategy == "reboot");
}

TEST_CASE("criticality pools arbitrate same-tick contention") {
  auto run = [](bool use_criticality) {
    Bus bus;
    SimNode shared;
    shared.name = "shared";
    shared.parameters["p"] = false;
    bus.add_node(std::move(shared));

    RuleSet rules = parse_ruleset(
        "RULE E POLICIES ERROR\n  TRIGGER temp > 50\n"
        "  STRATEGY fixE 0\n    ADAPTATION shared redeploy 2\n"
        "RULE W POLICIES WARNING\n  TRIGGER temp > 50\n"
        "  STRATEGY fixW 100\n    ADAPTATION shared set_parameter p true 1\n");
    PlannerConfig planner;
    planner.use_criticality = use_criticality;
    Engine engine(bus, rules, planner, MonitorConfig{{}, 10, 100});
    step(bus, engine, 60.0);
    return dispatched_strategies(bus);
  };

  // with pools the ERROR symptom claims the node first despite its price;
  // without them the cheap WARNING strategy wins
  CHECK(run(true) == std::vector<std::string>{"fixE"});
  CHECK(run(false) == std::vector<std::string>{"fixW"});
}

TEST_CASE("suspected upstream dependencies defer downstream repairs") {
  auto build = [](bool use_dependency_graph, const char* rules_text) {
    struct Fixture {
      Bus bus;
      std::unique_ptr<Engine> engine;
    };
    auto fx = std::make_unique<Fixture>();
    SimNode up;
    up.name = "up";
    up.outputs = {"t"};
    fx->bus.add_node(std::move(up));
    SimNode down;
    down.name = "down";
    down.subscriptions["in"] = "t";
    fx->bus.add_node(std::move(down));

    PlannerConfig planner;
    planner.use_dependency_graph = use_dependency_graph;
    fx->engine = std::make_unique<Engine>(fx->bus, parse_ruleset(rules_text), planner,
                                          MonitorConfig{{}, 10, 100});
    return fx;
  };

  const char* two_rules =
      "RULE UpBad POLICIES ERROR\n  TRIGGER temp > 50\n"
      "  STRATEGY fixUp 50\n    ADAPTATION up redeploy 1\n"
      "RULE DownBad POLICIES WARNING\n  TRIGGER temp > 50\n"
      "  STRATEGY fixDown 50\n    ADAPTATION down redeploy 1\n";

  SUBCASE("deferral on") {
    auto fx = build(true, two_rules);
    step(fx->bus, *fx->engine, 60.0);
    CHECK(dispatched_strategies(fx->bus) == std::vector<std::string>{"fixUp"});
    CHECK(fx->engine->symptoms()[1].state == SymptomState::AwaitingPlan);
  }

  SUBCASE("deferral off") {
    auto fx = build(false, two_rules);
    step(fx->bus, *fx->engine, 60.0);
    CHECK(dispatched_strategies(fx->bus).size() == 2);
  }

  SUBCASE("a rule does not defer on its own suspects") {
    const char* one_rule =
        "RULE Wide POLICIES WARNING\n  TRIGGER temp > 50\n"
        "  STRATEGY fixDown 50\n    ADAPTATION down redeploy 1\n"
        "  STRATEGY fixUp 40\n    ADAPTATION up redeploy 1\n";
    auto fx = build(true, one_rule);
    step(fx->bus, *fx->engine, 60.0);
    // both nodes are suspects of Wide itself, so nothing is deferred
    CHECK(dispatched_strategies(fx->bus) == std::vector<std::string>{"fixDown"});
  }
}

TEST_CASE("plan ties break by declaration order") {
  Bus bus;
  for (const char* name : {"n1", "n2"}) {
    SimNode n;
    n.name = name;
    bus.add_node(std::move(n));
  }
  RuleSet rules = parse_ruleset(
      "RULE R POLICIES WARNING\n  TRIGGER temp > 50\n"
      "  STRATEGY first 50\n    ADAPTATION n1 redeploy 2\n"
      "  STRATEGY second 50\n    ADAPTATION n2 redeploy 2\n");
  Engine engine(bus, rules, PlannerConfig{}, MonitorConfig{{}, 10, 100});
  step(bus, engine, 60.0);
  CHECK(dispatched_strategies(bus) == std::vector<std::string>{"first"});
}
