#pragma once

#include <stdexcept>
#include <string>

namespace plngm {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
    input = 2,
    numerical = 3,
    config = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

/// Malformed data, violated preconditions, invalid parameters.
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

/// Quadrature or optimizer did not converge, or a factorization failed.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

} // namespace plngm
