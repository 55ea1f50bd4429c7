#pragma once

#include <stdexcept>
#include <string>

namespace cfedit {

// Bad argument, violated precondition, or mismatched dimensions.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An instruction clause that does not match the grammar.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::string clause)
        : std::runtime_error(message), clause_(std::move(clause)) {}

    const std::string& clause() const noexcept { return clause_; }

private:
    std::string clause_;
};

// Unreadable or unwritable file, malformed file contents.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inconsistent configuration (registry, world, flags).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace cfedit
