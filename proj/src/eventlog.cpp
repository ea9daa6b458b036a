#include "adaptron/eventlog.hpp"

#include <json.hpp>

namespace adaptron {

std::string to_ndjson(const RunLog& log) {
  std::string out;
  for (const auto& event : log) {
    nlohmann::json record;
    record["tick"] = event.tick;
    record["event"] = event.kind;
    for (const auto& [key, value] : event.fields) record[key] = value;
    out += record.dump();
    out += '\n';
  }
  return out;
}

}  // namespace adaptron
