#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "doctest.h"
#include "guttation/errors.hpp"
#include "json.hpp"

namespace testing {

using Json = nlohmann::json;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("guttation-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Runs `fn` and returns the guttation error code it throws.
template <typename Fn>
guttation::ErrorCode error_code_of(Fn&& fn) {
    try {
        fn();
    } catch (const guttation::Error& e) {
        return e.code();
    }
    FAIL("expected a guttation::Error");
    return guttation::ErrorCode::IoError;
}

template <typename Fn>
std::string error_message_of(Fn&& fn) {
    try {
        fn();
    } catch (const guttation::Error& e) {
        return e.what();
    }
    FAIL("expected a guttation::Error");
    return {};
}

}  // namespace testing
