#pragma once

#include <map>
#include <string>
#include <vector>

namespace adaptron {

/// One record of the per-run event trace. Field maps keep keys sorted so the
/// serialized log is byte-stable for identical runs.
struct LogEvent {
  int tick = 0;
  std::string kind;
  std::map<std::string, std::string> fields;

  friend bool operator==(const LogEvent& a, const LogEvent& b) {
    return a.tick == b.tick && a.kind == b.kind && a.fields == b.fields;
  }
};

using RunLog = std::vector<LogEvent>;

/// Newline-delimited JSON, one record per event.
std::string to_ndjson(const RunLog& log);

}  // namespace adaptron
