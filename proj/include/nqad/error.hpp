#pragma once

#include <stdexcept>
#include <string>

namespace nqad {

/// Data or runtime problem: unreadable files, inconsistent inputs,
/// non-finite values. Maps to CLI exit code 1.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Configuration or usage problem. Maps to CLI exit code 2.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nqad
