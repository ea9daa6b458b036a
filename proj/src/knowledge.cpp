#include "adaptron/knowledge.hpp"

#include <deque>
#include <sstream>

namespace adaptron {

const char* to_string(Lifecycle lc) {
  switch (lc) {
    case Lifecycle::UNCONFIGURED: return "UNCONFIGURED";
    case Lifecycle::INACTIVE: return "INACTIVE";
    case Lifecycle::ACTIVE: return "ACTIVE";
    case Lifecycle::FINALIZED: return "FINALIZED";
  }
  return "?";
}

GraphDelta DependencyGraph::upsert_topology(const TopologySnapshot& snapshot) {
  GraphDelta delta;

  std::map<std::string, Lifecycle> incoming;
  for (const auto& [name, lc] : snapshot.nodes) incoming[name] = lc;

  for (auto it = nodes_.begin(); it != nodes_.end();) {
    if (!incoming.count(it->first)) {
      delta.removed_nodes.push_back(it->first);
      it = nodes_.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& [name, lc] : incoming) {
    auto it = nodes_.find(name);
    if (it == nodes_.end()) {
      ManagedNodeInfo info;
      info.name = name;
      info.lifecycle = lc;
      nodes_.emplace(name, std::move(info));
      delta.added_nodes.push_back(name);
    } else {
      it->second.lifecycle = lc;  // marks and flags survive
    }
  }

  std::set<Edge> incoming_edges(snapshot.edges.begin(), snapshot.edges.end());
  for (auto it = edges_.begin(); it != edges_.end();) {
    if (!incoming_edges.count(*it)) {
      delta.removed_edges.push_back(*it);
      it = edges_.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& e : incoming_edges) {
    if (edges_.insert(e).second) delta.added_edges.push_back(e);
  }
  return delta;
}

bool DependencyGraph::relevant_dependencies_present(const std::string& node,
                                                    CriticalityLevel level,
                                                    const std::string& exclude_rule) const {
  std::set<std::string> visited{node};
  std::deque<std::string> frontier{node};
  while (!frontier.empty()) {
    std::string current = frontier.front();
    frontier.pop_front();
    for (const auto& [publisher, topic, subscriber] : edges_) {
      (void)topic;
      if (subscriber != current || visited.count(publisher)) continue;
      visited.insert(publisher);
      // a node is never its own relevant dependency
      if (publisher != node) {
        auto it = nodes_.find(publisher);
        if (it != nodes_.end() && it->second.suspected_at_least(level, exclude_rule)) return true;
      }
      frontier.push_back(publisher);
    }
  }
  return false;
}

ManagedNodeInfo* DependencyGraph::find(const std::string& name) {
  auto it = nodes_.find(name);
  return it == nodes_.end() ? nullptr : &it->second;
}

const ManagedNodeInfo* DependencyGraph::find(const std::string& name) const {
  auto it = nodes_.find(name);
  return it == nodes_.end() ? nullptr : &it->second;
}

std::string DependencyGraph::to_dot() const {
  std::ostringstream out;
  out << "digraph managed_system {\n";
  for (const auto& [name, info] : nodes_) {
    out << "  \"" << name << "\" [label=\"" << name << " [" << to_string(info.lifecycle) << "/"
        << to_string(info.criticality_mark()) << "]\"];\n";
  }
  for (const auto& [publisher, topic, subscriber] : edges_) {
    out << "  \"" << publisher << "\" -> \"" << subscriber << "\" [label=\"" << topic
        << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

void StateStore::set(const std::string& key, Value value, int tick) {
  entries_[key] = {std::move(value), tick};
}

std::optional<Value> StateStore::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.first;
}

std::optional<int> StateStore::last_update_tick(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.second;
}

std::vector<std::string> KnowledgeBase::mark_rule_suspects(const Rule& rule, bool on) {
  std::vector<std::string> unknown;
  std::set<std::string> targets;
  for (const auto& strategy : rule.strategies)
    for (const auto& adaptation : strategy.adaptations) targets.insert(adaptation.target);

  for (const auto& target : targets) {
    ManagedNodeInfo* node = graph.find(target);
    if (!node) {
      unknown.push_back(target);
      continue;
    }
    if (on)
      node->suspected_rules[rule.name] = rule.criticality;
    else
      node->suspected_rules.erase(rule.name);
  }
  return unknown;
}

Value eval_expression(const Expression& expr, const StateStore& state) {
  return eval_expression(expr, [&state](const std::string& key) { return state.get(key); });
}

}  // namespace adaptron
