#pragma once

#include <cstdio>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cru::log {

/// Key/value record written as one line: `level=warn event=... key=value`.
/// Values containing spaces are double-quoted.
using Fields = std::vector<std::pair<std::string, std::string>>;

std::string format_record(std::string_view level, std::string_view event, const Fields& fields);

/// Writes to stderr. Silenced entirely by set_quiet(true).
void write(std::string_view level, std::string_view event, const Fields& fields = {});
inline void info(std::string_view event, const Fields& fields = {}) { write("info", event, fields); }
inline void warn(std::string_view event, const Fields& fields = {}) { write("warn", event, fields); }

void set_quiet(bool quiet);

}  // namespace cru::log
