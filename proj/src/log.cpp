#include "cru/log.hpp"

#include <atomic>
#include <mutex>

namespace cru::log {

namespace {
std::atomic<bool> g_quiet{false};
std::mutex g_mutex;

std::string quote_if_needed(const std::string& v) {
  if (!v.empty() && v.find_first_of(" \t\"=") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}
}  // namespace

std::string format_record(std::string_view level, std::string_view event, const Fields& fields) {
  std::string line = "level=";
  line += level;
  line += " event=";
  line += event;
  for (const auto& [k, v] : fields) {
    line += ' ';
    line += k;
    line += '=';
    line += quote_if_needed(v);
  }
  return line;
}

void write(std::string_view level, std::string_view event, const Fields& fields) {
  if (g_quiet.load()) return;
  const std::string line = format_record(level, event, fields) + "\n";
  std::lock_guard lock(g_mutex);
  std::fputs(line.c_str(), stderr);
}

void set_quiet(bool quiet) { g_quiet.store(quiet); }

}  // namespace cru::log
