#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "adaptron/simbus.hpp"

using namespace adaptron;

namespace {

AdaptationSpec make_spec(std::string target, AdaptationKind kind, int impact) {
  AdaptationSpec spec;
  spec.target = std::move(target);
  spec.kind = kind;
  spec.impact_ticks = impact;
  return spec;
}

AdaptationSpec param_spec(std::string target, std::string parameter, const char* expr,
                          int impact) {
  AdaptationSpec spec = make_spec(std::move(target), AdaptationKind::Reparametrize, impact);
  spec.parameter = std::move(parameter);
  spec.value = parse_expression(expr);
  return spec;
}

AdaptationSpec comm_spec(std::string target, std::string subscription, std::string topic,
                         int impact) {
  AdaptationSpec spec = make_spec(std::move(target), AdaptationKind::CommunicationChange, impact);
  spec.parameter = std::move(subscription);
  spec.new_topic = std::move(topic);
  return spec;
}

FaultInjection fault(FaultType type, std::string node, int tick) {
  FaultInjection f;
  f.kind.type = type;
  f.kind.node = std::move(node);
  f.inject_tick = tick;
  return f;
}

bool fault_cleared_logged(const Bus& bus, const std::string& type, const std::string& how) {
  for (const auto& e : bus.run_log())
    if (e.kind == "fault_cleared" && e.fields.at("type") == type && e.fields.at("how") == how)
      return true;
  return false;
}

}  // namespace

TEST_CASE("healthy pipeline reaches steady state on the first tick") {
  PerceptionSystem system(ScenarioConfig{}, false);
  for (int i = 0; i < 5; ++i) system.advance_tick();

  Bus& bus = system.bus();
  CHECK(bus.current_tick() == 4);
  CHECK(bus.staleness("rgb_raw") == 0);
  CHECK(bus.staleness("depth_raw") == 0);
  CHECK(bus.staleness("fused") == 0);
  CHECK(bus.staleness("segmentation") == 0);
  // enhancement starts inactive, so its topic never appears
  CHECK(bus.staleness("rgb_enhanced") > 1000);

  bool saw_focus = false, saw_entropy = false;
  for (const auto& [key, value] : bus.diagnostics_this_tick()) {
    if (key == "focus_measure") {
      saw_focus = true;
      CHECK(value == Value{1.0});
    }
    if (key == "segmentation_entropy") {
      saw_entropy = true;
      CHECK(value == Value{0.03});
    }
  }
  CHECK(saw_focus);
  CHECK(saw_entropy);
}

TEST_CASE("publish period gates node execution") {
  ScenarioConfig cfg;
  cfg.node_periods["camera_rgb"] = 2;
  PerceptionSystem system(cfg, false);
  for (int i = 0; i < 11; ++i) system.advance_tick();  // now at tick 10
  const auto* ticks = system.bus().publish_ticks("rgb_raw");
  REQUIRE(ticks != nullptr);
  CHECK(ticks->size() == 6);  // ticks 0, 2, 4, 6, 8, 10
  for (int t : *ticks) CHECK(t % 2 == 0);
}

TEST_CASE("effects land exactly impact ticks after the call") {
  Bus bus;
  SimNode n;
  n.name = "x";
  n.parameters["p"] = false;
  bus.add_node(std::move(n));
  StateStore state;

  bus.advance_tick();  // tick 0
  ServiceResult r = bus.call_adaptation_service(param_spec("x", "p", "true", 3), state);
  REQUIRE(r.ok);
  for (int t = 1; t <= 2; ++t) {
    bus.advance_tick();
    CHECK(bus.find_node("x")->parameters.at("p") == Value{false});
  }
  bus.advance_tick();  // tick 3
  CHECK(bus.find_node("x")->parameters.at("p") == Value{true});
}

TEST_CASE("service validation rejects impossible transitions") {
  Bus bus;
  SimNode a;
  a.name = "a";
  a.subscriptions["in"] = "t1";
  bus.add_node(std::move(a));
  SimNode b;
  b.name = "b";
  b.lifecycle = Lifecycle::INACTIVE;
  bus.add_node(std::move(b));
  StateStore state;
  bus.advance_tick();

  CHECK(!bus.call_adaptation_service(make_spec("a", AdaptationKind::Activate, 1), state).ok);
  CHECK(!bus.call_adaptation_service(make_spec("b", AdaptationKind::Deactivate, 1), state).ok);
  CHECK(!bus.call_adaptation_service(make_spec("ghost", AdaptationKind::Redeploy, 1), state).ok);
  CHECK(!bus.call_adaptation_service(param_spec("a", "nope", "1", 1), state).ok);
  CHECK(!bus.call_adaptation_service(param_spec("b", "nope", "1", 1), state).ok);  // not active
  CHECK(!bus.call_adaptation_service(comm_spec("a", "missing", "t2", 1), state).ok);
  CHECK(!bus.call_adaptation_service(comm_spec("a", "in", "t1", 1), state).ok);  // already bound
  CHECK(bus.call_adaptation_service(comm_spec("a", "in", "t2", 1), state).ok);
}

TEST_CASE("validation runs against the projected lifecycle") {
  Bus bus;
  SimNode n;
  n.name = "x";
  bus.add_node(std::move(n));
  StateStore state;
  bus.advance_tick();

  // restart pattern: deactivate, then activate while the first effect is
  // still pending
  CHECK(bus.call_adaptation_service(make_spec("x", AdaptationKind::Deactivate, 1), state).ok);
  CHECK(!bus.call_adaptation_service(make_spec("x", AdaptationKind::Deactivate, 1), state).ok);
  CHECK(bus.call_adaptation_service(make_spec("x", AdaptationKind::Activate, 2), state).ok);
  CHECK(bus.find_node("x")->lifecycle == Lifecycle::ACTIVE);  // nothing landed yet

  bus.advance_tick();
  CHECK(bus.find_node("x")->lifecycle == Lifecycle::INACTIVE);
  bus.advance_tick();
  CHECK(bus.find_node("x")->lifecycle == Lifecycle::ACTIVE);
}

TEST_CASE("redeploy kills the process now and relaunches with defaults") {
  Bus bus;
  SimNode n;
  n.name = "x";
  n.parameters["p"] = std::int64_t{1};
  n.default_parameters = n.parameters;
  bus.add_node(std::move(n));
  StateStore state;
  bus.advance_tick();

  bus.find_node("x")->parameters["p"] = std::int64_t{9};
  CHECK(bus.call_adaptation_service(make_spec("x", AdaptationKind::Redeploy, 2), state).ok);
  CHECK(bus.find_node("x")->lifecycle == Lifecycle::FINALIZED);

  bus.advance_tick();
  CHECK(bus.find_node("x")->lifecycle == Lifecycle::FINALIZED);
  bus.advance_tick();
  CHECK(bus.find_node("x")->lifecycle == Lifecycle::ACTIVE);
  CHECK(bus.find_node("x")->parameters.at("p") == Value{std::int64_t{1}});
}

TEST_CASE("restartable outage hangs the node without killing it") {
  ScenarioConfig cfg;
  cfg.fault_schedule = {fault(FaultType::OutageRestartable, "camera_rgb", 3)};
  PerceptionSystem system(cfg, false);
  for (int i = 0; i < 8; ++i) system.advance_tick();  // tick 7

  CHECK(system.bus().find_node("camera_rgb")->lifecycle == Lifecycle::ACTIVE);
  CHECK(system.bus().staleness("rgb_raw") == 5);  // last publish was tick 2
  CHECK(system.fault_active(FaultType::OutageRestartable, "camera_rgb"));

  // restart clears the hang once the activate effect lands
  StateStore state;
  REQUIRE(system.bus()
              .call_adaptation_service(make_spec("camera_rgb", AdaptationKind::Deactivate, 1),
                                       state)
              .ok);
  REQUIRE(system.bus()
              .call_adaptation_service(make_spec("camera_rgb", AdaptationKind::Activate, 2),
                                       state)
              .ok);
  system.advance_tick();
  CHECK(system.fault_active(FaultType::OutageRestartable, "camera_rgb"));
  system.advance_tick();  // activate lands at tick 9
  CHECK(!system.fault_active(FaultType::OutageRestartable, "camera_rgb"));
  CHECK(system.all_injected_faults_cleared());
  CHECK(fault_cleared_logged(system.bus(), "outage_restartable", "restart"));
  system.advance_tick();
  CHECK(system.bus().staleness("rgb_raw") == 0);
}

TEST_CASE("redeploy-only outage crashes the node and rejects a restart") {
  ScenarioConfig cfg;
  cfg.fault_schedule = {fault(FaultType::OutageRedeployOnly, "sensor_fusion", 2)};
  PerceptionSystem system(cfg, false);
  for (int i = 0; i < 6; ++i) system.advance_tick();  // tick 5

  CHECK(system.bus().find_node("sensor_fusion")->lifecycle == Lifecycle::FINALIZED);
  CHECK(system.bus().staleness("fused") == 4);  // last publish was tick 1

  StateStore state;
  CHECK(!system.bus()
             .call_adaptation_service(make_spec("sensor_fusion", AdaptationKind::Deactivate, 1),
                                      state)
             .ok);
  CHECK(system.fault_active(FaultType::OutageRedeployOnly, "sensor_fusion"));

  REQUIRE(system.bus()
              .call_adaptation_service(make_spec("sensor_fusion", AdaptationKind::Redeploy, 2),
                                       state)
              .ok);
  system.advance_tick();
  system.advance_tick();  // relaunch lands at tick 7
  CHECK(!system.fault_active(FaultType::OutageRedeployOnly, "sensor_fusion"));
  CHECK(fault_cleared_logged(system.bus(), "outage_redeploy_only", "redeploy"));
  system.advance_tick();
  CHECK(system.bus().staleness("fused") == 0);
}

TEST_CASE("quality faults shift the diagnostics and clear by their remedies") {
  SUBCASE("misalignment raises entropy until recalibration") {
    ScenarioConfig cfg;
    cfg.fault_schedule = {fault(FaultType::Misalignment, "", 1)};
    PerceptionSystem system(cfg, false);
    system.advance_tick();
    system.advance_tick();
    bool found = false;
    for (const auto& [key, value] : system.bus().diagnostics_this_tick())
      if (key == "segmentation_entropy") {
        found = true;
        CHECK(value == Value{0.10});
      }
    CHECK(found);

    StateStore state;
    REQUIRE(system.bus()
                .call_adaptation_service(
                    param_spec("sensor_fusion", "recalibration", "true", 1), state)
                .ok);
    system.advance_tick();
    CHECK(system.all_injected_faults_cleared());
    CHECK(fault_cleared_logged(system.bus(), "misalignment", "recalibration"));
  }

  SUBCASE("defocus drops the focus measure until autofocus") {
    ScenarioConfig cfg;
    cfg.fault_schedule = {fault(FaultType::Defocus, "", 1)};
    PerceptionSystem system(cfg, false);
    system.advance_tick();
    system.advance_tick();
    for (const auto& [key, value] : system.bus().diagnostics_this_tick())
      if (key == "focus_measure") CHECK(value == Value{0.2});

    StateStore state;
    REQUIRE(system.bus()
                .call_adaptation_service(param_spec("camera_rgb", "autofocus", "true", 2), state)
                .ok);
    system.advance_tick();
    system.advance_tick();
    CHECK(system.all_injected_faults_cleared());
    CHECK(fault_cleared_logged(system.bus(), "defocus", "autofocus"));
  }

  SUBCASE("degradation clears once enhancement feeds the fusion") {
    ScenarioConfig cfg;
    cfg.fault_schedule = {fault(FaultType::Degradation, "", 1)};
    PerceptionSystem system(cfg, false);
    system.advance_tick();
    system.advance_tick();

    StateStore state;
    REQUIRE(system.bus()
                .call_adaptation_service(
                    make_spec("image_enhancement", AdaptationKind::Activate, 1), state)
                .ok);
    REQUIRE(system.bus()
                .call_adaptation_service(
                    comm_spec("sensor_fusion", "camera_input", "rgb_enhanced", 1), state)
                .ok);
    system.advance_tick();
    CHECK(system.all_injected_faults_cleared());
    CHECK(fault_cleared_logged(system.bus(), "degradation", "enhancement"));
  }

  SUBCASE("stale enhancement clears by bypassing the enhancer") {
    ScenarioConfig cfg;
    cfg.fault_schedule = {fault(FaultType::StaleEnhancement, "", 1)};
    PerceptionSystem system(cfg, true);  // enhancement in the loop
    system.advance_tick();
    system.advance_tick();

    StateStore state;
    REQUIRE(system.bus()
                .call_adaptation_service(
                    make_spec("image_enhancement", AdaptationKind::Deactivate, 1), state)
                .ok);
    REQUIRE(system.bus()
                .call_adaptation_service(
                    comm_spec("sensor_fusion", "camera_input", "rgb_raw", 1), state)
                .ok);
    system.advance_tick();
    CHECK(system.all_injected_faults_cleared());
    CHECK(fault_cleared_logged(system.bus(), "stale_enhancement", "bypass"));
  }
}

TEST_CASE("introspection reports declared structure even for dead nodes") {
  ScenarioConfig cfg;
  cfg.fault_schedule = {fault(FaultType::OutageRedeployOnly, "sensor_fusion", 1)};
  PerceptionSystem system(cfg, false);
  system.advance_tick();
  system.advance_tick();

  TopologySnapshot snap = system.bus().introspect();
  CHECK(snap.nodes.size() == 5);
  bool fusion_finalized = false;
  for (const auto& [name, lc] : snap.nodes)
    if (name == "sensor_fusion") fusion_finalized = lc == Lifecycle::FINALIZED;
  CHECK(fusion_finalized);

  bool fused_edge = false, camera_edge = false;
  for (const auto& [pub, topic, sub] : snap.edges) {
    if (pub == "sensor_fusion" && topic == "fused" && sub == "segmentation") fused_edge = true;
    if (pub == "camera_rgb" && topic == "rgb_raw" && sub == "sensor_fusion") camera_edge = true;
  }
  CHECK(fused_edge);
  CHECK(camera_edge);
}

TEST_CASE("identical runs produce identical event logs") {
  auto run_once = [] {
    ScenarioConfig cfg;
    cfg.fault_schedule = {fault(FaultType::OutageRestartable, "camera_rgb", 2),
                          fault(FaultType::Defocus, "", 3)};
    PerceptionSystem system(cfg, false);
    StateStore state;
    for (int i = 0; i < 20; ++i) {
      system.advance_tick();
      if (i == 6)
        system.bus().call_adaptation_service(make_spec("camera_rgb", AdaptationKind::Redeploy, 3),
                                             state);
      if (i == 10)
        system.bus().call_adaptation_service(param_spec("camera_rgb", "autofocus", "true", 2),
                                             state);
    }
    return to_ndjson(system.bus().run_log());
  };
  std::string first = run_once();
  CHECK(!first.empty());
  CHECK(first == run_once());
}
