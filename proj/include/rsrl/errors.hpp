#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rsrl {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite intermediate values, failed root brackets, non-convergence.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operation not defined for the given model variant.
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed or unknown configuration entries.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Model invariant violations, one message per offending item.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> issues)
        : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string out = "validation failed";
        for (const auto& issue : issues) {
            out += "\n  ";
            out += issue;
        }
        return out;
    }

    std::vector<std::string> issues_;
};

} // namespace rsrl
