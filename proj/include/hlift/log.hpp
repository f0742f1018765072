#pragma once

#include <sstream>
#include <string>

namespace hlift::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

void set_level(Level level);
Level level();
/// Accepts debug|info|warn|error|off; anything else leaves the level untouched.
bool set_level(const std::string& name);

void write(Level level, const std::string& msg);

template <class... Args>
void emit(Level lvl, const Args&... args) {
    if (lvl < level()) return;
    std::ostringstream os;
    (os << ... << args);
    write(lvl, os.str());
}

template <class... Args> void debug(const Args&... a) { emit(Level::Debug, a...); }
template <class... Args> void info(const Args&... a) { emit(Level::Info, a...); }
template <class... Args> void warn(const Args&... a) { emit(Level::Warn, a...); }

} // namespace hlift::log
