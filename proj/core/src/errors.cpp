#include "overscale/errors.hpp"

namespace overscale {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::unsupported_conversion: return "unsupported-conversion";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::unidentifiable_bracket: return "unidentifiable-bracket";
    case ErrorKind::degenerate_data: return "degenerate-data";
    case ErrorKind::invalid_start: return "invalid-start";
    case ErrorKind::numerical_failure: return "numerical-failure";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::validation_error: return "validation-error";
    case ErrorKind::bootstrap_unstable: return "bootstrap-unstable";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace overscale
