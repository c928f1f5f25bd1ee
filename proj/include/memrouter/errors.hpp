#pragma once

#include <stdexcept>
#include <string>

namespace memrouter {

/// Input data is malformed, inconsistent, or violates a contract.
/// CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Caller misuse: bad arguments, unknown identifiers, impossible requests.
/// CLI maps this to exit code 1.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace memrouter
