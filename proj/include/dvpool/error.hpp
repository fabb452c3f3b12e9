#pragma once

#include <stdexcept>
#include <string>

namespace dvpool {

/// Raised when a caller breaks an operation's precondition (bad shape, bad
/// range, invalid config). Carries a human-readable message only.
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by the array/label codecs on malformed or unsupported input.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ContractViolation(what);
}

}  // namespace detail
}  // namespace dvpool
