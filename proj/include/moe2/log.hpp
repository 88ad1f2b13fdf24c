#pragma once

// Line-delimited JSON logging to stderr with a process-wide level. Log
// output never feeds back into computation, so it is exempt from the
// byte-reproducibility promise the data files make.

#include <initializer_list>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>

namespace moe2 {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

inline LogLevel& log_level() {
  static LogLevel level = LogLevel::kInfo;
  return level;
}

inline LogLevel log_level_from_name(const std::string& name) {
  if (name == "debug") return LogLevel::kDebug;
  if (name == "info") return LogLevel::kInfo;
  if (name == "warn") return LogLevel::kWarn;
  if (name == "error") return LogLevel::kError;
  if (name == "off") return LogLevel::kOff;
  throw std::invalid_argument("unknown log level: " + name);
}

inline std::string log_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          static const char* hex = "0123456789abcdef";
          out += "\\u00";
          out += hex[(c >> 4) & 0xF];
          out += hex[c & 0xF];
        } else {
          out += c;
        }
    }
  }
  return out;
}

inline void log_line(LogLevel level, const std::string& event,
                     std::initializer_list<std::pair<const char*, std::string>> fields = {}) {
  if (level < log_level() || log_level() == LogLevel::kOff) return;
  const char* name = level == LogLevel::kDebug  ? "debug"
                     : level == LogLevel::kInfo ? "info"
                     : level == LogLevel::kWarn ? "warn"
                                                : "error";
  std::string line = "{\"level\":\"";
  line += name;
  line += "\",\"event\":\"";
  line += log_escape(event);
  line += "\"";
  for (const auto& [key, value] : fields) {
    line += ",\"";
    line += log_escape(key);
    line += "\":\"";
    line += log_escape(value);
    line += "\"";
  }
  line += "}\n";
  std::cerr << line;
}

}  // namespace moe2
