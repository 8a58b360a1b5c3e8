#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nca {

inline constexpr const char* kToolVersion = "0.1.0";

// Fatal data/configuration problems; the CLI maps these to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };

inline LogLevel& log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("NCA_LOG");
        if (!env) return LogLevel::Info;
        std::string v(env);
        if (v == "debug") return LogLevel::Debug;
        if (v == "info") return LogLevel::Info;
        if (v == "warn") return LogLevel::Warn;
        if (v == "error") return LogLevel::Error;
        return LogLevel::Info;
    }();
    return level;
}

inline void log(LogLevel level, const std::string& msg) {
    if (level < log_level()) return;
    static const char* names[] = {"debug", "info", "warn", "error"};
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

inline void log_warn(const std::string& msg) { log(LogLevel::Warn, msg); }
inline void log_info(const std::string& msg) { log(LogLevel::Info, msg); }
inline void log_debug(const std::string& msg) { log(LogLevel::Debug, msg); }

// FNV-1a, used for input digests in run manifests.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

inline std::string file_digest(const std::string& path) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a:%016llx",
                  static_cast<unsigned long long>(fnv1a(read_file(path))));
    return buf;
}

// Deterministic uniform double in [0,1) from a raw 64-bit draw. Avoids
// std::uniform_real_distribution, whose output is implementation-defined.
inline double u64_to_unit(std::uint64_t u) {
    return static_cast<double>(u >> 11) * 0x1.0p-53;
}

// splitmix64, used to derive independent stream seeds from one user seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace nca
