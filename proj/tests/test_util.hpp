#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

namespace testutil {

// Scratch directory removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("nca_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name, const std::string& content) const {
        auto p = path / name;
        std::ofstream out(p, std::ios::binary);
        out << content;
        return p.string();
    }

    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testutil
