#pragma once

#include <stdexcept>
#include <string>

namespace downscale {

/// Bad input: malformed files, violated preconditions, inconsistent shapes.
/// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A linear system that cannot be solved at the requested regularization.
class SingularSystemError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
}

}  // namespace detail
}  // namespace downscale
