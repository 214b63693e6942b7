#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace overscale {

/// Failure categories surfaced by the library. The CLI maps these onto exit
/// codes: usage problems, data problems, and numerical failures.
enum class ErrorKind {
    invalid_argument,
    unsupported_conversion,
    insufficient_data,
    unidentifiable_bracket,
    degenerate_data,
    invalid_start,
    numerical_failure,
    parse_error,
    validation_error,
    bootstrap_unstable,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

} // namespace overscale
