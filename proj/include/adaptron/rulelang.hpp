#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adaptron/expression.hpp"

namespace adaptron {

/// Ordering is total and used for prioritization: OK < WARNING < ERROR.
enum class CriticalityLevel { OK = 0, WARNING = 1, ERROR = 2 };

const char* to_string(CriticalityLevel level);
std::optional<CriticalityLevel> criticality_from_string(std::string_view text);

enum class AdaptationKind {
  Reparametrize,
  CommunicationChange,
  Activate,
  Deactivate,
  Redeploy,
  ModeChange,
};

const char* to_keyword(AdaptationKind kind);
std::optional<AdaptationKind> adaptation_kind_from_keyword(std::string_view text);

/// One atomic change to one managed node.
struct AdaptationSpec {
  std::string target;          // managed-node name
  AdaptationKind kind = AdaptationKind::Redeploy;
  std::string parameter;       // Reparametrize: parameter name; CommunicationChange:
                               // subscription name; ModeChange: mode name
  Expression value;            // Reparametrize only
  std::string new_topic;       // CommunicationChange only
  int impact_ticks = 0;        // engine ticks until the effect can be judged
  int line = 0;                // source location, not part of structural equality

  friend bool operator==(const AdaptationSpec& a, const AdaptationSpec& b) {
    return a.target == b.target && a.kind == b.kind && a.parameter == b.parameter &&
           a.value == b.value && a.new_topic == b.new_topic && a.impact_ticks == b.impact_ticks;
  }
};

struct Strategy {
  std::string name;
  int success_probability = 0;  // percent, [0, 100]
  std::vector<AdaptationSpec> adaptations;
  int line = 0;

  /// Worst-case system impact: max over the strategy's adaptations.
  int impact() const {
    int m = 0;
    for (const auto& a : adaptations) m = std::max(m, a.impact_ticks);
    return m;
  }

  /// Node names touched by any adaptation.
  std::set<std::string> affected_nodes() const {
    std::set<std::string> nodes;
    for (const auto& a : adaptations) nodes.insert(a.target);
    return nodes;
  }

  friend bool operator==(const Strategy& a, const Strategy& b) {
    return a.name == b.name && a.success_probability == b.success_probability &&
           a.adaptations == b.adaptations;
  }
};

struct Rule {
  std::string name;
  CriticalityLevel criticality = CriticalityLevel::OK;
  Expression trigger;
  std::vector<Strategy> strategies;
  int line = 0;

  friend bool operator==(const Rule& a, const Rule& b) {
    return a.name == b.name && a.criticality == b.criticality && a.trigger == b.trigger &&
           a.strategies == b.strategies;
  }
};

struct RuleSet {
  std::vector<Rule> rules;

  /// Highest strategy impact across the whole rule file; 1 when every impact
  /// is zero so cost normalization stays finite.
  int i_max() const {
    int m = 0;
    for (const auto& r : rules)
      for (const auto& s : r.strategies) m = std::max(m, s.impact());
    return m > 0 ? m : 1;
  }

  const Rule* find_rule(const std::string& name) const {
    for (const auto& r : rules)
      if (r.name == name) return &r;
    return nullptr;
  }

  friend bool operator==(const RuleSet& a, const RuleSet& b) { return a.rules == b.rules; }
};

struct LintDiagnostic {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::string rule;
  std::string strategy;  // empty when the diagnostic is rule-level
  std::string message;
  int line = 0;
  int column = 1;
};

RuleSet parse_ruleset(std::string_view text);

/// Canonical DSL text; parse_ruleset(serialize_ruleset(rs)) == rs.
std::string serialize_ruleset(const RuleSet& rs);

/// Design-time validity checking: double activation, deactivating what the
/// strategy already removed, unknown targets, duplicate names, probability
/// sums. Error-severity diagnostics make the `lint` command fail.
std::vector<LintDiagnostic> validate_ruleset(const RuleSet& rs,
                                             const std::set<std::string>& declared_nodes);

}  // namespace adaptron
