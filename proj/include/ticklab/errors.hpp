#pragma once

#include <stdexcept>
#include <string>

namespace ticklab {

// Exit-code contract used by the CLI: 2 usage, 3 data, 4 numeric.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ticklab
