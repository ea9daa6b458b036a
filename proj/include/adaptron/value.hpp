#pragma once

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>

namespace adaptron {

/// Runtime value of the expression language and the state store.
/// Integers widen to reals in mixed arithmetic; everything else is strict.
using Value = std::variant<bool, std::int64_t, double, std::string>;

inline bool is_numeric(const Value& v) {
  return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v);
}

inline double as_real(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

inline const char* type_name(const Value& v) {
  switch (v.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    case 2: return "real";
    default: return "string";
  }
}

/// Shortest round-trip text form. Used by the serializer and the event log,
/// so it must be deterministic.
inline std::string value_to_string(const Value& v) {
  struct Visitor {
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const {
      char buf[32];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), d);
      if (ec != std::errc{}) throw std::runtime_error("value_to_string: to_chars failed");
      std::string s(buf, ptr);
      // make sure a real never re-parses as an integer
      if (s.find_first_of(".eEnN") == std::string::npos) s += ".0";
      return s;
    }
    std::string operator()(const std::string& s) const { return "\"" + s + "\""; }
  };
  return std::visit(Visitor{}, v);
}

}  // namespace adaptron
