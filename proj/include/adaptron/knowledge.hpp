#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "adaptron/rulelang.hpp"
#include "adaptron/value.hpp"

namespace adaptron {

enum class Lifecycle { UNCONFIGURED, INACTIVE, ACTIVE, FINALIZED };

const char* to_string(Lifecycle lc);

struct ManagedNodeInfo {
  std::string name;
  Lifecycle lifecycle = Lifecycle::ACTIVE;
  bool currently_adapted = false;
  // rule name -> rule criticality; the node is potentially responsible for
  // each of these triggered rules
  std::map<std::string, CriticalityLevel> suspected_rules;

  CriticalityLevel criticality_mark() const {
    CriticalityLevel mark = CriticalityLevel::OK;
    for (const auto& [_, level] : suspected_rules) mark = std::max(mark, level);
    return mark;
  }

  /// True when some suspected rule (other than `exclude_rule`) has
  /// criticality >= level.
  bool suspected_at_least(CriticalityLevel level, const std::string& exclude_rule = {}) const {
    for (const auto& [rule, l] : suspected_rules)
      if (l >= level && rule != exclude_rule) return true;
    return false;
  }
};

/// (publisher node, topic, subscriber node); the subscriber depends on the
/// publisher.
using Edge = std::tuple<std::string, std::string, std::string>;

struct TopologySnapshot {
  std::vector<std::pair<std::string, Lifecycle>> nodes;
  std::vector<Edge> edges;
};

struct GraphDelta {
  std::vector<std::string> added_nodes;
  std::vector<std::string> removed_nodes;
  std::vector<Edge> added_edges;
  std::vector<Edge> removed_edges;

  bool empty() const {
    return added_nodes.empty() && removed_nodes.empty() && added_edges.empty() &&
           removed_edges.empty();
  }
};

class DependencyGraph {
 public:
  /// Make the graph match the snapshot. Criticality marks, adapted flags and
  /// suspected rules survive for nodes present in both.
  GraphDelta upsert_topology(const TopologySnapshot& snapshot);

  /// True iff some transitive upstream publisher of `node` (excluding the
  /// node itself) is suspected at `level` or above. Suspicions raised by
  /// `exclude_rule` do not count: a symptom's own suspects must not defer
  /// its own repair. Tolerates cycles.
  bool relevant_dependencies_present(const std::string& node, CriticalityLevel level,
                                     const std::string& exclude_rule = {}) const;

  bool contains(const std::string& name) const { return nodes_.count(name) != 0; }
  ManagedNodeInfo* find(const std::string& name);
  const ManagedNodeInfo* find(const std::string& name) const;
  const std::map<std::string, ManagedNodeInfo>& nodes() const { return nodes_; }
  const std::set<Edge>& edges() const { return edges_; }

  /// DOT text; node label "name [lifecycle/criticality]", edge label = topic.
  std::string to_dot() const;

 private:
  std::map<std::string, ManagedNodeInfo> nodes_;
  std::set<Edge> edges_;
};

class StateStore {
 public:
  void set(const std::string& key, Value value, int tick);
  std::optional<Value> get(const std::string& key) const;
  std::optional<int> last_update_tick(const std::string& key) const;
  const std::map<std::string, std::pair<Value, int>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::pair<Value, int>> entries_;  // key -> (value, tick)
};

/// The K of the loop: dependency graph, state estimation, rule set.
struct KnowledgeBase {
  DependencyGraph graph;
  StateStore state;
  RuleSet rules;

  /// Mark (or unmark) every node targeted by any adaptation of the rule as a
  /// suspect at the rule's criticality. Unknown targets are reported back.
  std::vector<std::string> mark_rule_suspects(const Rule& rule, bool on);
};

/// Trigger/parameter evaluation against the state store.
Value eval_expression(const Expression& expr, const StateStore& state);

}  // namespace adaptron
