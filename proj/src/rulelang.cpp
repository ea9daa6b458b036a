#include "adaptron/rulelang.hpp"

#include <cctype>
#include <map>
#include <sstream>

namespace adaptron {

const char* to_string(CriticalityLevel level) {
  switch (level) {
    case CriticalityLevel::OK: return "OK";
    case CriticalityLevel::WARNING: return "WARNING";
    case CriticalityLevel::ERROR: return "ERROR";
  }
  return "?";
}

std::optional<CriticalityLevel> criticality_from_string(std::string_view text) {
  if (text == "OK") return CriticalityLevel::OK;
  if (text == "WARNING") return CriticalityLevel::WARNING;
  if (text == "ERROR") return CriticalityLevel::ERROR;
  return std::nullopt;
}

const char* to_keyword(AdaptationKind kind) {
  switch (kind) {
    case AdaptationKind::Reparametrize: return "set_parameter";
    case AdaptationKind::CommunicationChange: return "change_communication";
    case AdaptationKind::Activate: return "activate";
    case AdaptationKind::Deactivate: return "deactivate";
    case AdaptationKind::Redeploy: return "redeploy";
    case AdaptationKind::ModeChange: return "set_mode";
  }
  return "?";
}

std::optional<AdaptationKind> adaptation_kind_from_keyword(std::string_view text) {
  if (text == "set_parameter") return AdaptationKind::Reparametrize;
  if (text == "change_communication") return AdaptationKind::CommunicationChange;
  if (text == "activate") return AdaptationKind::Activate;
  if (text == "deactivate") return AdaptationKind::Deactivate;
  if (text == "redeploy") return AdaptationKind::Redeploy;
  if (text == "set_mode") return AdaptationKind::ModeChange;
  return std::nullopt;
}

namespace {

struct RawToken {
  std::string text;
  int line = 1;
  int column = 1;
  size_t offset = 0;  // byte offset into the source
};

bool is_keyword(const std::string& t) {
  return t == "RULE" || t == "POLICIES" || t == "TRIGGER" || t == "STRATEGY" ||
         t == "ADAPTATION";
}

// Whitespace-delimited tokens; '#' starts a line comment.
std::vector<RawToken> tokenize(std::string_view text) {
  std::vector<RawToken> out;
  int line = 1, column = 1;
  size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    if (c == '\n') {
      ++line;
      column = 1;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++column;
      ++i;
      continue;
    }
    RawToken t;
    t.line = line;
    t.column = column;
    t.offset = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) &&
           text[i] != '#') {
      ++i;
      ++column;
    }
    t.text = std::string(text.substr(t.offset, i - t.offset));
    out.push_back(std::move(t));
  }
  return out;
}

class RulesetParser {
 public:
  RulesetParser(std::string_view source) : source_(source), tokens_(tokenize(source)) {}

  RuleSet parse() {
    RuleSet rs;
    while (!at_end()) {
      const RawToken& t = peek();
      if (t.text != "RULE")
        throw ParseError("expected RULE, got '" + t.text + "'", t.line, t.column);
      rs.rules.push_back(parse_rule());
    }
    return rs;
  }

 private:
  bool at_end() const { return pos_ >= tokens_.size(); }
  const RawToken& peek() const { return tokens_[pos_]; }
  const RawToken& take() { return tokens_[pos_++]; }

  const RawToken& expect_ident(const char* what) {
    if (at_end()) {
      const RawToken& last = tokens_.back();
      throw ParseError(std::string("missing ") + what, last.line, last.column);
    }
    const RawToken& t = take();
    if (is_keyword(t.text))
      throw ParseError(std::string("missing ") + what + " before '" + t.text + "'", t.line,
                       t.column);
    return t;
  }

  int expect_int(const char* what) {
    const RawToken& t = expect_ident(what);
    try {
      size_t used = 0;
      int v = std::stoi(t.text, &used);
      if (used != t.text.size()) throw std::invalid_argument(t.text);
      return v;
    } catch (const std::exception&) {
      throw ParseError(std::string("malformed number '") + t.text + "' for " + what, t.line,
                       t.column);
    }
  }

  void expect_keyword(const char* kw) {
    if (at_end()) {
      const RawToken& last = tokens_.back();
      throw ParseError(std::string("missing ") + kw, last.line, last.column);
    }
    const RawToken& t = take();
    if (t.text != kw)
      throw ParseError(std::string("expected ") + kw + ", got '" + t.text + "'", t.line,
                       t.column);
  }

  // Raw source slice covering tokens [first, last], both indices into tokens_.
  std::string slice(size_t first, size_t last) const {
    size_t begin = tokens_[first].offset;
    size_t end = tokens_[last].offset + tokens_[last].text.size();
    return std::string(source_.substr(begin, end - begin));
  }

  // Expression tokens run until the next keyword or the end of the start line.
  Expression parse_inline_expression(const char* what) {
    if (at_end() || is_keyword(peek().text)) {
      int l = at_end() ? tokens_.back().line : peek().line;
      int c = at_end() ? tokens_.back().column : peek().column;
      throw ParseError(std::string("missing ") + what, l, c);
    }
    size_t first = pos_;
    int start_line = peek().line;
    while (!at_end() && !is_keyword(peek().text) && peek().line == start_line) ++pos_;
    return parse_expression(slice(first, pos_ - 1), tokens_[first].line, tokens_[first].column);
  }

  Rule parse_rule() {
    Rule rule;
    rule.line = peek().line;
    expect_keyword("RULE");
    rule.name = expect_ident("rule name").text;
    expect_keyword("POLICIES");
    const RawToken& level = expect_ident("criticality level");
    auto crit = criticality_from_string(level.text);
    if (!crit)
      throw ParseError("unknown criticality level '" + level.text +
                           "' (expected OK, WARNING or ERROR)",
                       level.line, level.column);
    rule.criticality = *crit;
    expect_keyword("TRIGGER");
    rule.trigger = parse_inline_expression("trigger expression");
    while (!at_end() && peek().text == "STRATEGY") rule.strategies.push_back(parse_strategy());
    if (rule.strategies.empty()) {
      throw ParseError("rule '" + rule.name + "' has no strategies", rule.line, 1);
    }
    return rule;
  }

  Strategy parse_strategy() {
    Strategy s;
    s.line = peek().line;
    expect_keyword("STRATEGY");
    s.name = expect_ident("strategy name").text;
    s.success_probability = expect_int("success probability");
    if (s.success_probability < 0 || s.success_probability > 100) {
      throw ParseError("success probability must be in [0, 100]", s.line, 1);
    }
    while (!at_end() && peek().text == "ADAPTATION") s.adaptations.push_back(parse_adaptation());
    if (s.adaptations.empty())
      throw ParseError("strategy '" + s.name + "' has no adaptations", s.line, 1);
    return s;
  }

  AdaptationSpec parse_adaptation() {
    AdaptationSpec a;
    const RawToken& kw = peek();
    a.line = kw.line;
    expect_keyword("ADAPTATION");
    a.target = expect_ident("adaptation target").text;
    const RawToken& kind_tok = expect_ident("adaptation kind");
    auto kind = adaptation_kind_from_keyword(kind_tok.text);
    if (!kind)
      throw ParseError("unknown adaptation kind '" + kind_tok.text + "'", kind_tok.line,
                       kind_tok.column);
    a.kind = *kind;

    // remaining tokens on this line: kind-specific parameters, then the impact
    size_t first = pos_;
    while (!at_end() && !is_keyword(peek().text) && peek().line == kw.line) ++pos_;
    size_t count = pos_ - first;
    if (count < 1)
      throw ParseError("missing adaptation impact", kind_tok.line, kind_tok.column);
    const RawToken& impact_tok = tokens_[pos_ - 1];
    try {
      size_t used = 0;
      a.impact_ticks = std::stoi(impact_tok.text, &used);
      if (used != impact_tok.text.size()) throw std::invalid_argument(impact_tok.text);
    } catch (const std::exception&) {
      throw ParseError("malformed adaptation impact '" + impact_tok.text + "'", impact_tok.line,
                       impact_tok.column);
    }
    if (a.impact_ticks < 0)
      throw ParseError("adaptation impact must be non-negative", impact_tok.line,
                       impact_tok.column);
    size_t params = count - 1;

    switch (a.kind) {
      case AdaptationKind::Reparametrize:
        if (params < 2)
          throw ParseError("set_parameter needs a parameter name and an expression", kw.line, 1);
        a.parameter = tokens_[first].text;
        a.value = parse_expression(slice(first + 1, pos_ - 2), tokens_[first + 1].line,
                                   tokens_[first + 1].column);
        break;
      case AdaptationKind::CommunicationChange:
        if (params != 2)
          throw ParseError("change_communication needs a subscription name and a topic", kw.line,
                           1);
        a.parameter = tokens_[first].text;
        a.new_topic = tokens_[first + 1].text;
        break;
      case AdaptationKind::ModeChange:
        if (params != 1) throw ParseError("set_mode needs a mode name", kw.line, 1);
        a.parameter = tokens_[first].text;
        break;
      case AdaptationKind::Activate:
      case AdaptationKind::Deactivate:
      case AdaptationKind::Redeploy:
        if (params != 0)
          throw ParseError(std::string(to_keyword(a.kind)) + " takes no parameters", kw.line, 1);
        break;
    }
    return a;
  }

  std::string_view source_;
  std::vector<RawToken> tokens_;
  size_t pos_ = 0;
};

}  // namespace

RuleSet parse_ruleset(std::string_view text) { return RulesetParser(text).parse(); }

std::string serialize_ruleset(const RuleSet& rs) {
  std::ostringstream out;
  for (const auto& rule : rs.rules) {
    out << "RULE " << rule.name << "\n";
    out << "  POLICIES " << to_string(rule.criticality) << "\n";
    out << "  TRIGGER " << rule.trigger.to_string() << "\n";
    for (const auto& s : rule.strategies) {
      out << "    STRATEGY " << s.name << " " << s.success_probability << "\n";
      for (const auto& a : s.adaptations) {
        out << "      ADAPTATION " << a.target << " " << to_keyword(a.kind);
        switch (a.kind) {
          case AdaptationKind::Reparametrize:
            out << " " << a.parameter << " " << a.value.to_string();
            break;
          case AdaptationKind::CommunicationChange:
            out << " " << a.parameter << " " << a.new_topic;
            break;
          case AdaptationKind::ModeChange:
            out << " " << a.parameter;
            break;
          default:
            break;
        }
        out << " " << a.impact_ticks << "\n";
      }
    }
  }
  return out.str();
}

std::vector<LintDiagnostic> validate_ruleset(const RuleSet& rs,
                                             const std::set<std::string>& declared_nodes) {
  std::vector<LintDiagnostic> diags;
  auto error = [&](const Rule& r, const Strategy* s, std::string msg, int line) {
    diags.push_back({LintDiagnostic::Severity::Error, r.name, s ? s->name : "", std::move(msg),
                     line, 1});
  };
  auto warning = [&](const Rule& r, std::string msg, int line) {
    diags.push_back({LintDiagnostic::Severity::Warning, r.name, "", std::move(msg), line, 1});
  };

  std::set<std::string> rule_names;
  for (const auto& rule : rs.rules) {
    if (!rule_names.insert(rule.name).second)
      error(rule, nullptr, "duplicate rule name '" + rule.name + "'", rule.line);

    std::set<std::string> strategy_names;
    int probability_sum = 0;
    for (const auto& strategy : rule.strategies) {
      if (!strategy_names.insert(strategy.name).second)
        error(rule, &strategy, "duplicate strategy name '" + strategy.name + "'", strategy.line);
      probability_sum += strategy.success_probability;

      // Track what the strategy itself has added or removed so far.
      enum class Seen { Activated, Deactivated };
      std::map<std::string, Seen> seen;
      for (const auto& a : strategy.adaptations) {
        if (!declared_nodes.empty() && !declared_nodes.count(a.target))
          error(rule, &strategy, "unknown target node '" + a.target + "'", a.line);
        switch (a.kind) {
          case AdaptationKind::Activate: {
            auto it = seen.find(a.target);
            if (it != seen.end() && it->second == Seen::Activated)
              error(rule, &strategy, "adds node " + a.target + " twice", a.line);
            seen[a.target] = Seen::Activated;
            break;
          }
          case AdaptationKind::Deactivate: {
            auto it = seen.find(a.target);
            if (it != seen.end() && it->second == Seen::Deactivated)
              error(rule, &strategy, "removes node " + a.target + " twice", a.line);
            seen[a.target] = Seen::Deactivated;
            break;
          }
          case AdaptationKind::Redeploy:
            seen[a.target] = Seen::Activated;
            break;
          default:
            break;
        }
      }
    }
    if (probability_sum != 100)
      warning(rule,
              "strategy success probabilities sum to " + std::to_string(probability_sum) +
                  ", not 100 (they are relative weights)",
              rule.line);
  }
  return diags;
}

}  // namespace adaptron
