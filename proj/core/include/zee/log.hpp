#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>

namespace zee::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

// Level comes from the ZEE_LOG environment variable (debug|info|warn|error|off),
// default warn.
inline Level threshold() {
  static Level lvl = [] {
    const char* env = std::getenv("ZEE_LOG");
    if (!env) return Level::Warn;
    std::string s(env);
    for (auto& c : s) c = static_cast<char>(std::tolower(c));
    if (s == "debug") return Level::Debug;
    if (s == "info") return Level::Info;
    if (s == "warn" || s == "warning") return Level::Warn;
    if (s == "error") return Level::Error;
    if (s == "off" || s == "none") return Level::Off;
    return Level::Warn;
  }();
  return lvl;
}

inline void write(Level lvl, const std::string& msg) {
  if (lvl < threshold()) return;
  static std::mutex mu;
  static const char* names[] = {"debug", "info", "warn", "error"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[zee " << names[static_cast<int>(lvl)] << "] " << msg << "\n";
}

inline void debug(const std::string& m) { write(Level::Debug, m); }
inline void info(const std::string& m) { write(Level::Info, m); }
inline void warn(const std::string& m) { write(Level::Warn, m); }
inline void error(const std::string& m) { write(Level::Error, m); }

}  // namespace zee::log
