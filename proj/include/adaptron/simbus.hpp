#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adaptron/eventlog.hpp"
#include "adaptron/knowledge.hpp"
#include "adaptron/rulelang.hpp"
#include "adaptron/value.hpp"

namespace adaptron {

class Bus;

/// Node behavior, run once per due tick while the node is ACTIVE.
using NodeBehavior = std::function<void(Bus&, struct SimNode&)>;

struct SimNode {
  std::string name;
  Lifecycle lifecycle = Lifecycle::ACTIVE;
  // lifecycle including effects that are dispatched but not yet landed;
  // service validation runs against this
  Lifecycle projected_lifecycle = Lifecycle::ACTIVE;
  std::map<std::string, Value> parameters;
  std::map<std::string, Value> default_parameters;
  std::optional<std::string> mode;
  std::map<std::string, Lifecycle> mode_lifecycle;  // optional per-mode lifecycle table
  int publish_period_ticks = 1;
  std::map<std::string, std::string> subscriptions;  // subscription name -> topic
  std::vector<std::string> outputs;                  // topics this node publishes
  NodeBehavior behavior;
};

struct ServiceResult {
  bool ok = true;
  std::string error;
};

/// Deliverable effect of an acked adaptation service call.
struct AdaptationEffect {
  std::string node;
  AdaptationKind kind = AdaptationKind::Redeploy;
  std::string parameter;
  Value value;            // Reparametrize: evaluated value
  std::string new_topic;  // CommunicationChange
};

/// Deterministic discrete-tick publish/subscribe middleware. Nodes run
/// sequentially within a tick in registration order; effects of adaptation
/// service calls land exactly impact_ticks after the call.
class Bus {
 public:
  int current_tick() const { return tick_; }

  SimNode& add_node(SimNode node);
  SimNode* find_node(const std::string& name);
  const SimNode* find_node(const std::string& name) const;
  const std::vector<std::string>& node_order() const { return order_; }

  void publish(const std::string& node, const std::string& topic,
               std::map<std::string, Value> payload = {});
  void publish_diagnostic(const std::string& node, const std::string& key, Value value);

  /// Ticks since `topic` was last published; a large sentinel when never.
  int staleness(const std::string& topic) const;
  int publish_count_since(const std::string& topic, int from_tick) const;
  const std::vector<int>* publish_ticks(const std::string& topic) const;

  /// Diagnostics records published during the current tick.
  const std::vector<std::pair<std::string, Value>>& diagnostics_this_tick() const {
    return diagnostics_;
  }

  /// Runs due effects, then each due ACTIVE node's behavior.
  void advance_tick();

  /// Validates against the projected state and queues the effect; the ack is
  /// immediate, the effect lands after spec.impact_ticks.
  ServiceResult call_adaptation_service(const AdaptationSpec& spec, const StateStore& state);

  TopologySnapshot introspect() const;

  /// Invoked whenever an adaptation effect lands (fault bookkeeping hooks in
  /// here). Redeploy relaunches fire this too.
  std::function<void(const AdaptationEffect&)> on_effect_landed;

  /// Invoked right after the tick counter advances, before effects land and
  /// before any node runs.
  std::function<void()> on_tick_begin;

  void log(std::string kind, std::map<std::string, std::string> fields);
  const RunLog& run_log() const { return log_; }
  RunLog& run_log() { return log_; }

 private:
  struct PendingEffect {
    int land_tick = 0;
    int sequence = 0;
    AdaptationEffect effect;
  };

  void apply_effect(const AdaptationEffect& effect);

  int tick_ = 0;
  bool started_ = false;
  std::map<std::string, SimNode> nodes_;
  std::vector<std::string> order_;
  std::map<std::string, std::vector<int>> topic_ticks_;
  std::map<std::string, std::map<std::string, Value>> topic_payload_;
  std::vector<std::pair<std::string, Value>> diagnostics_;
  std::vector<PendingEffect> pending_;
  int effect_sequence_ = 0;
  RunLog log_;
};

enum class FaultType {
  OutageRestartable,
  OutageRedeployOnly,
  Misalignment,
  Degradation,
  StaleEnhancement,
  Defocus,
};

const char* to_string(FaultType type);
std::optional<FaultType> fault_type_from_string(std::string_view text);

struct FaultKind {
  FaultType type = FaultType::Defocus;
  std::string node;  // outages only

  friend bool operator==(const FaultKind& a, const FaultKind& b) {
    return a.type == b.type && a.node == b.node;
  }
};

/// Strategy names (from the perception rule set) that clear the fault.
std::vector<std::string> resolvable_by(const FaultKind& kind);

struct FaultInjection {
  FaultKind kind;
  int inject_tick = 0;
  bool active = false;
  bool cleared = false;  // once cleared, stays cleared
};

/// Tunable constants of the perception scenario. Only the 0.06 trigger
/// threshold in the rule file is fixed; everything here is configuration.
struct ScenarioConfig {
  int tick_ms = 100;
  int monitor_window_ticks = 10;
  int input_staleness_max = 2;   // ticks before a consumer treats its input as stale
  double entropy_healthy = 0.03;
  double entropy_misalignment = 0.10;
  double entropy_degradation = 0.09;
  double entropy_stale_enhancement = 0.08;
  double focus_healthy = 1.0;
  double focus_defocused = 0.2;
  int inject_base_tick = 20;
  int tick_budget = 500;
  std::vector<std::string> monitored_topics = {"rgb_raw", "depth_raw", "rgb_enhanced", "fused",
                                               "segmentation"};
  std::map<std::string, int> node_periods;  // default 1
  std::vector<FaultInjection> fault_schedule;
  unsigned long long seed = 0;
};

ScenarioConfig load_scenario_file(const std::string& path);

/// The simulated managed system: RGB/depth cameras, optional image
/// enhancement, sensor fusion and semantic segmentation, plus fault
/// injection for the ten uncertainty sources.
class PerceptionSystem {
 public:
  PerceptionSystem(ScenarioConfig config, bool enhancement_initially_active);

  Bus& bus() { return bus_; }
  const ScenarioConfig& config() const { return config_; }

  void inject_fault(FaultInjection injection);
  const std::vector<FaultInjection>& faults() const { return faults_; }
  bool fault_active(FaultType type, const std::string& node = "") const;
  bool all_injected_faults_cleared() const;

  /// One simulation step: activate due faults, land effects, run nodes.
  void advance_tick();

 private:
  void build_nodes(bool enhancement_initially_active);
  void handle_effect(const AdaptationEffect& effect);
  void clear_fault(FaultType type, const std::string& node, const std::string& how);
  double current_entropy() const;
  bool enhancement_effective() const;
  bool outage_suppressed(const std::string& node) const;
  bool input_fresh(const SimNode& node, const std::string& subscription) const;

  ScenarioConfig config_;
  Bus bus_;
  std::vector<FaultInjection> faults_;
};

}  // namespace adaptron
