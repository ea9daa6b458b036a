#include "adaptron/simbus.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace adaptron {

namespace {
constexpr int kNeverPublished = 1000000;
}

SimNode& Bus::add_node(SimNode node) {
  if (nodes_.count(node.name)) throw std::invalid_argument("duplicate node " + node.name);
  node.projected_lifecycle = node.lifecycle;
  order_.push_back(node.name);
  return nodes_.emplace(node.name, std::move(node)).first->second;
}

SimNode* Bus::find_node(const std::string& name) {
  auto it = nodes_.find(name);
  return it == nodes_.end() ? nullptr : &it->second;
}

const SimNode* Bus::find_node(const std::string& name) const {
  auto it = nodes_.find(name);
  return it == nodes_.end() ? nullptr : &it->second;
}

void Bus::publish(const std::string& node, const std::string& topic,
                  std::map<std::string, Value> payload) {
  topic_ticks_[topic].push_back(tick_);
  topic_payload_[topic] = std::move(payload);
  log("publish", {{"node", node}, {"topic", topic}});
}

void Bus::publish_diagnostic(const std::string& node, const std::string& key, Value value) {
  (void)node;
  diagnostics_.emplace_back(key, std::move(value));
}

int Bus::staleness(const std::string& topic) const {
  auto it = topic_ticks_.find(topic);
  if (it == topic_ticks_.end() || it->second.empty()) return kNeverPublished;
  return tick_ - it->second.back();
}

int Bus::publish_count_since(const std::string& topic, int from_tick) const {
  auto it = topic_ticks_.find(topic);
  if (it == topic_ticks_.end()) return 0;
  const auto& ticks = it->second;
  auto lo = std::lower_bound(ticks.begin(), ticks.end(), from_tick);
  return static_cast<int>(ticks.end() - lo);
}

const std::vector<int>* Bus::publish_ticks(const std::string& topic) const {
  auto it = topic_ticks_.find(topic);
  return it == topic_ticks_.end() ? nullptr : &it->second;
}

void Bus::advance_tick() {
  if (started_)
    ++tick_;
  else
    started_ = true;
  diagnostics_.clear();

  if (on_tick_begin) on_tick_begin();

  // effects land before any node runs, so a recovered upstream feeds its
  // consumers within the same tick
  std::stable_sort(pending_.begin(), pending_.end(), [](const auto& a, const auto& b) {
    return std::tie(a.land_tick, a.sequence) < std::tie(b.land_tick, b.sequence);
  });
  while (!pending_.empty() && pending_.front().land_tick <= tick_) {
    AdaptationEffect effect = pending_.front().effect;
    pending_.erase(pending_.begin());
    apply_effect(effect);
  }

  for (const auto& name : order_) {
    SimNode& node = nodes_.at(name);
    if (node.lifecycle != Lifecycle::ACTIVE) continue;
    if (node.publish_period_ticks > 1 && tick_ % node.publish_period_ticks != 0) continue;
    if (node.behavior) node.behavior(*this, node);
  }
}

ServiceResult Bus::call_adaptation_service(const AdaptationSpec& spec, const StateStore& state) {
  auto fail = [&](std::string error) {
    log("service_call", {{"node", spec.target},
                         {"kind", to_keyword(spec.kind)},
                         {"ok", "false"},
                         {"error", error}});
    return ServiceResult{false, std::move(error)};
  };

  SimNode* node = find_node(spec.target);
  if (!node) return fail("unknown node");

  AdaptationEffect effect;
  effect.node = spec.target;
  effect.kind = spec.kind;
  std::string detail;

  switch (spec.kind) {
    case AdaptationKind::Reparametrize: {
      if (node->projected_lifecycle != Lifecycle::ACTIVE) return fail("node not active");
      if (!node->parameters.count(spec.parameter))
        return fail("unknown parameter " + spec.parameter);
      Value value;
      try {
        value = eval_expression(spec.value, state);
      } catch (const EvalError& e) {
        return fail(std::string("parameter expression: ") + e.what());
      }
      effect.parameter = spec.parameter;
      effect.value = value;
      detail = spec.parameter + "=" + value_to_string(value);
      break;
    }
    case AdaptationKind::CommunicationChange: {
      if (node->projected_lifecycle == Lifecycle::FINALIZED) return fail("node finalized");
      auto it = node->subscriptions.find(spec.parameter);
      if (it == node->subscriptions.end())
        return fail("unknown subscription " + spec.parameter);
      if (it->second == spec.new_topic) return fail("already bound to " + spec.new_topic);
      effect.parameter = spec.parameter;
      effect.new_topic = spec.new_topic;
      detail = spec.parameter + "->" + spec.new_topic;
      break;
    }
    case AdaptationKind::Activate: {
      if (node->projected_lifecycle != Lifecycle::INACTIVE)
        return fail(std::string("cannot activate from ") +
                    to_string(node->projected_lifecycle));
      node->projected_lifecycle = Lifecycle::ACTIVE;
      break;
    }
    case AdaptationKind::Deactivate: {
      if (node->projected_lifecycle != Lifecycle::ACTIVE)
        return fail(std::string("cannot deactivate from ") +
                    to_string(node->projected_lifecycle));
      node->projected_lifecycle = Lifecycle::INACTIVE;
      break;
    }
    case AdaptationKind::Redeploy: {
      // process dies immediately; the relaunch lands like any other effect
      node->lifecycle = Lifecycle::FINALIZED;
      node->projected_lifecycle = Lifecycle::ACTIVE;
      break;
    }
    case AdaptationKind::ModeChange: {
      if (node->projected_lifecycle == Lifecycle::FINALIZED) return fail("node finalized");
      effect.parameter = spec.parameter;
      detail = "mode=" + spec.parameter;
      auto it = node->mode_lifecycle.find(spec.parameter);
      if (it != node->mode_lifecycle.end()) node->projected_lifecycle = it->second;
      break;
    }
  }

  pending_.push_back({tick_ + spec.impact_ticks, effect_sequence_++, std::move(effect)});
  std::map<std::string, std::string> fields{{"node", spec.target},
                                            {"kind", to_keyword(spec.kind)},
                                            {"ok", "true"},
                                            {"lands", std::to_string(tick_ + spec.impact_ticks)}};
  if (!detail.empty()) fields["detail"] = detail;
  log("service_call", std::move(fields));
  return {};
}

void Bus::apply_effect(const AdaptationEffect& effect) {
  SimNode* node = find_node(effect.node);
  if (!node) return;

  std::string detail;
  switch (effect.kind) {
    case AdaptationKind::Reparametrize:
      node->parameters[effect.parameter] = effect.value;
      detail = effect.parameter + "=" + value_to_string(effect.value);
      break;
    case AdaptationKind::CommunicationChange:
      node->subscriptions[effect.parameter] = effect.new_topic;
      detail = effect.parameter + "->" + effect.new_topic;
      break;
    case AdaptationKind::Activate:
      node->lifecycle = Lifecycle::ACTIVE;
      break;
    case AdaptationKind::Deactivate:
      node->lifecycle = Lifecycle::INACTIVE;
      break;
    case AdaptationKind::Redeploy:
      // relaunch: fresh process, default parameters
      node->lifecycle = Lifecycle::ACTIVE;
      node->parameters = node->default_parameters;
      break;
    case AdaptationKind::ModeChange: {
      node->mode = effect.parameter;
      auto it = node->mode_lifecycle.find(effect.parameter);
      if (it != node->mode_lifecycle.end()) node->lifecycle = it->second;
      detail = "mode=" + effect.parameter;
      break;
    }
  }

  std::map<std::string, std::string> fields{{"node", effect.node},
                                            {"kind", to_keyword(effect.kind)}};
  if (!detail.empty()) fields["detail"] = detail;
  log("effect_landed", std::move(fields));

  if (on_effect_landed) on_effect_landed(effect);
}

TopologySnapshot Bus::introspect() const {
  // edges reflect declared structure, not momentary liveness: a crashed
  // publisher must stay visible as a dependency or root-cause analysis would
  // lose it exactly when it matters
  TopologySnapshot snapshot;
  std::map<std::string, std::string> publisher_of;  // topic -> declared publisher
  for (const auto& [name, node] : nodes_) {
    snapshot.nodes.emplace_back(name, node.lifecycle);
    for (const auto& topic : node.outputs) publisher_of[topic] = name;
  }
  for (const auto& [name, node] : nodes_) {
    for (const auto& [sub, topic] : node.subscriptions) {
      (void)sub;
      auto it = publisher_of.find(topic);
      if (it != publisher_of.end()) snapshot.edges.emplace_back(it->second, topic, name);
    }
  }
  return snapshot;
}

void Bus::log(std::string kind, std::map<std::string, std::string> fields) {
  log_.push_back({tick_, std::move(kind), std::move(fields)});
}

const char* to_string(FaultType type) {
  switch (type) {
    case FaultType::OutageRestartable: return "outage_restartable";
    case FaultType::OutageRedeployOnly: return "outage_redeploy_only";
    case FaultType::Misalignment: return "misalignment";
    case FaultType::Degradation: return "degradation";
    case FaultType::StaleEnhancement: return "stale_enhancement";
    case FaultType::Defocus: return "defocus";
  }
  return "?";
}

std::optional<FaultType> fault_type_from_string(std::string_view text) {
  for (FaultType t : {FaultType::OutageRestartable, FaultType::OutageRedeployOnly,
                      FaultType::Misalignment, FaultType::Degradation,
                      FaultType::StaleEnhancement, FaultType::Defocus})
    if (text == to_string(t)) return t;
  return std::nullopt;
}

std::vector<std::string> resolvable_by(const FaultKind& kind) {
  switch (kind.type) {
    case FaultType::OutageRestartable: return {"restart", "redeploy"};
    case FaultType::OutageRedeployOnly: return {"redeploy"};
    case FaultType::Misalignment: return {"recalibration"};
    case FaultType::Degradation: return {"enhancement_activate"};
    case FaultType::StaleEnhancement: return {"enhancement_deactivate"};
    case FaultType::Defocus: return {"autofocus"};
  }
  return {};
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file " + path);
  nlohmann::json j = nlohmann::json::parse(in);

  ScenarioConfig cfg;
  cfg.tick_ms = j.value("tick_ms", cfg.tick_ms);
  cfg.monitor_window_ticks = j.value("monitor_window_ticks", cfg.monitor_window_ticks);
  cfg.input_staleness_max = j.value("input_staleness_max", cfg.input_staleness_max);
  cfg.entropy_healthy = j.value("entropy_healthy", cfg.entropy_healthy);
  cfg.entropy_misalignment = j.value("entropy_misalignment", cfg.entropy_misalignment);
  cfg.entropy_degradation = j.value("entropy_degradation", cfg.entropy_degradation);
  cfg.entropy_stale_enhancement =
      j.value("entropy_stale_enhancement", cfg.entropy_stale_enhancement);
  cfg.focus_healthy = j.value("focus_healthy", cfg.focus_healthy);
  cfg.focus_defocused = j.value("focus_defocused", cfg.focus_defocused);
  cfg.inject_base_tick = j.value("inject_base_tick", cfg.inject_base_tick);
  cfg.tick_budget = j.value("tick_budget", cfg.tick_budget);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("monitored_topics"))
    cfg.monitored_topics = j["monitored_topics"].get<std::vector<std::string>>();
  if (j.contains("node_periods"))
    cfg.node_periods = j["node_periods"].get<std::map<std::string, int>>();
  if (j.contains("fault_schedule")) {
    for (const auto& f : j["fault_schedule"]) {
      FaultInjection inj;
      auto type = fault_type_from_string(f.at("type").get<std::string>());
      if (!type) throw std::runtime_error("unknown fault type in " + path);
      inj.kind.type = *type;
      inj.kind.node = f.value("node", std::string{});
      inj.inject_tick = f.value("inject_tick", 0);
      cfg.fault_schedule.push_back(inj);
    }
  }
  return cfg;
}

PerceptionSystem::PerceptionSystem(ScenarioConfig config, bool enhancement_initially_active)
    : config_(std::move(config)) {
  build_nodes(enhancement_initially_active);
  faults_ = config_.fault_schedule;
  bus_.on_effect_landed = [this](const AdaptationEffect& e) { handle_effect(e); };
  bus_.on_tick_begin = [this] {
    for (auto& fault : faults_) {
      if (fault.active || fault.cleared || fault.inject_tick > bus_.current_tick()) continue;
      fault.active = true;
      bus_.log("fault_injected",
               {{"type", to_string(fault.kind.type)}, {"node", fault.kind.node}});
      if (fault.kind.type == FaultType::OutageRedeployOnly) {
        // process crash: only a fresh deployment brings it back
        SimNode* node = bus_.find_node(fault.kind.node);
        if (node) {
          node->lifecycle = Lifecycle::FINALIZED;
          node->projected_lifecycle = Lifecycle::FINALIZED;
        }
      }
    }
  };
}

void PerceptionSystem::build_nodes(bool enhancement_initially_active) {
  auto period = [this](const std::string& name) {
    auto it = config_.node_periods.find(name);
    return it == config_.node_periods.end() ? 1 : it->second;
  };

  SimNode camera_rgb;
  camera_rgb.name = "camera_rgb";
  camera_rgb.outputs = {"rgb_raw"};
  camera_rgb.parameters["autofocus"] = false;
  camera_rgb.default_parameters = camera_rgb.parameters;
  camera_rgb.publish_period_ticks = period(camera_rgb.name);
  camera_rgb.behavior = [this](Bus& bus, SimNode& node) {
    if (outage_suppressed(node.name)) return;
    bus.publish(node.name, "rgb_raw");
    bus.publish_diagnostic(node.name, "focus_measure",
                           fault_active(FaultType::Defocus) ? config_.focus_defocused
                                                            : config_.focus_healthy);
  };
  bus_.add_node(std::move(camera_rgb));

  SimNode camera_depth;
  camera_depth.name = "camera_depth";
  camera_depth.outputs = {"depth_raw"};
  camera_depth.publish_period_ticks = period(camera_depth.name);
  camera_depth.behavior = [this](Bus& bus, SimNode& node) {
    if (outage_suppressed(node.name)) return;
    bus.publish(node.name, "depth_raw");
  };
  bus_.add_node(std::move(camera_depth));

  SimNode enhancement;
  enhancement.name = "image_enhancement";
  enhancement.lifecycle = enhancement_initially_active ? Lifecycle::ACTIVE : Lifecycle::INACTIVE;
  enhancement.subscriptions["input"] = "rgb_raw";
  enhancement.outputs = {"rgb_enhanced"};
  enhancement.publish_period_ticks = period(enhancement.name);
  enhancement.behavior = [this](Bus& bus, SimNode& node) {
    if (outage_suppressed(node.name)) return;
    if (input_fresh(node, "input")) bus.publish(node.name, "rgb_enhanced");
  };
  bus_.add_node(std::move(enhancement));

  SimNode fusion;
  fusion.name = "sensor_fusion";
  fusion.subscriptions["camera_input"] = enhancement_initially_active ? "rgb_enhanced" : "rgb_raw";
  fusion.subscriptions["depth_input"] = "depth_raw";
  fusion.parameters["recalibration"] = false;
  fusion.default_parameters = fusion.parameters;
  fusion.outputs = {"fused"};
  fusion.publish_period_ticks = period(fusion.name);
  fusion.behavior = [this](Bus& bus, SimNode& node) {
    if (outage_suppressed(node.name)) return;
    if (input_fresh(node, "camera_input") && input_fresh(node, "depth_input"))
      bus.publish(node.name, "fused");
  };
  bus_.add_node(std::move(fusion));

  SimNode segmentation;
  segmentation.name = "segmentation";
  segmentation.subscriptions["input"] = "fused";
  segmentation.outputs = {"segmentation"};
  segmentation.publish_period_ticks = period(segmentation.name);
  segmentation.behavior = [this](Bus& bus, SimNode& node) {
    if (outage_suppressed(node.name)) return;
    if (!input_fresh(node, "input")) return;
    bus.publish(node.name, "segmentation");
    bus.publish_diagnostic(node.name, "segmentation_entropy", current_entropy());
  };
  bus_.add_node(std::move(segmentation));
}

void PerceptionSystem::inject_fault(FaultInjection injection) {
  faults_.push_back(std::move(injection));
}

bool PerceptionSystem::fault_active(FaultType type, const std::string& node) const {
  for (const auto& fault : faults_)
    if (fault.active && fault.kind.type == type && (node.empty() || fault.kind.node == node))
      return true;
  return false;
}

bool PerceptionSystem::all_injected_faults_cleared() const {
  for (const auto& fault : faults_)
    if (!fault.cleared) return false;
  return true;
}

void PerceptionSystem::advance_tick() { bus_.advance_tick(); }

void PerceptionSystem::handle_effect(const AdaptationEffect& effect) {
  switch (effect.kind) {
    case AdaptationKind::Activate:
      // a completed restart un-hangs the node
      if (fault_active(FaultType::OutageRestartable, effect.node))
        clear_fault(FaultType::OutageRestartable, effect.node, "restart");
      break;
    case AdaptationKind::Redeploy:
      if (fault_active(FaultType::OutageRestartable, effect.node))
        clear_fault(FaultType::OutageRestartable, effect.node, "redeploy");
      if (fault_active(FaultType::OutageRedeployOnly, effect.node))
        clear_fault(FaultType::OutageRedeployOnly, effect.node, "redeploy");
      break;
    case AdaptationKind::Reparametrize:
      if (effect.node == "sensor_fusion" && effect.parameter == "recalibration" &&
          effect.value == Value{true} && fault_active(FaultType::Misalignment))
        clear_fault(FaultType::Misalignment, "", "recalibration");
      if (effect.node == "camera_rgb" && effect.parameter == "autofocus" &&
          effect.value == Value{true} && fault_active(FaultType::Defocus))
        clear_fault(FaultType::Defocus, "", "autofocus");
      break;
    default:
      break;
  }

  if (fault_active(FaultType::Degradation) && enhancement_effective())
    clear_fault(FaultType::Degradation, "", "enhancement");

  if (fault_active(FaultType::StaleEnhancement)) {
    const SimNode* enh = bus_.find_node("image_enhancement");
    const SimNode* fusion = bus_.find_node("sensor_fusion");
    if (enh && fusion && enh->lifecycle != Lifecycle::ACTIVE &&
        fusion->subscriptions.at("camera_input") == "rgb_raw")
      clear_fault(FaultType::StaleEnhancement, "", "bypass");
  }
}

void PerceptionSystem::clear_fault(FaultType type, const std::string& node,
                                   const std::string& how) {
  for (auto& fault : faults_) {
    if (!fault.active || fault.kind.type != type) continue;
    if (!node.empty() && fault.kind.node != node) continue;
    fault.active = false;
    fault.cleared = true;
    bus_.log("fault_cleared", {{"type", to_string(type)}, {"node", fault.kind.node}, {"how", how}});
  }
}

double PerceptionSystem::current_entropy() const {
  if (fault_active(FaultType::Misalignment)) return config_.entropy_misalignment;
  if (fault_active(FaultType::Degradation)) return config_.entropy_degradation;
  if (fault_active(FaultType::StaleEnhancement)) return config_.entropy_stale_enhancement;
  return config_.entropy_healthy;
}

bool PerceptionSystem::enhancement_effective() const {
  const SimNode* enh = bus_.find_node("image_enhancement");
  const SimNode* fusion = bus_.find_node("sensor_fusion");
  return enh && fusion && enh->lifecycle == Lifecycle::ACTIVE &&
         fusion->subscriptions.at("camera_input") == "rgb_enhanced";
}

bool PerceptionSystem::outage_suppressed(const std::string& node) const {
  // a hung node stays ACTIVE but stops producing
  return fault_active(FaultType::OutageRestartable, node);
}

bool PerceptionSystem::input_fresh(const SimNode& node, const std::string& subscription) const {
  return bus_.staleness(node.subscriptions.at(subscription)) <= config_.input_staleness_max;
}

}  // namespace adaptron
