#ifndef CS2NET_ERROR_HPP
#define CS2NET_ERROR_HPP

#include <stdexcept>
#include <string>

namespace cs2net {

// Shape / size violations (mismatched operands, non-integral conv output, ...).
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values in a forward pass or gradient; carries the producing op.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Precondition violations that are not shape related (non-binary labels, ...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid model / run configuration.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation would exceed a configured resource budget.
struct ResourceError : std::runtime_error {
    explicit ResourceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file content.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cs2net

#endif
