#include "hlift/log.hpp"
#include "hlift/error.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace hlift {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Structure: return "structure error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Rank: return "rank error";
    case ErrorKind::Convergence: return "iteration error";
    case ErrorKind::Degenerate: return "degenerate input";
    case ErrorKind::Regression: return "regression error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Training: return "training error";
    case ErrorKind::Insufficient: return "insufficient history";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::MissingStage: return "missing stage";
    }
    return "error";
}

namespace log {
namespace {
std::atomic<Level> g_level{Level::Info};
std::mutex g_mutex;

const char* tag(Level l) {
    switch (l) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
    case Level::Off: break;
    }
    return "";
}
} // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

bool set_level(const std::string& name) {
    if (name == "debug") set_level(Level::Debug);
    else if (name == "info") set_level(Level::Info);
    else if (name == "warn") set_level(Level::Warn);
    else if (name == "error") set_level(Level::Error);
    else if (name == "off") set_level(Level::Off);
    else return false;
    return true;
}

void write(Level lvl, const std::string& msg) {
    if (lvl < g_level.load()) return;
    std::lock_guard lock(g_mutex);
    std::cerr << "[" << tag(lvl) << "] " << msg << '\n';
}

} // namespace log
} // namespace hlift
