#pragma once

#include <stdexcept>
#include <string>

namespace regs {

// Caller passed arguments outside an operation's domain.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Object state does not satisfy an operation's precondition
// (e.g. backward against a different forward pass).
class InvalidState : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Optimization produced a non-finite value.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DecodeError : public std::runtime_error {
public:
    enum class Kind { MalformedHeader, Truncated, UnknownVersion, Io };

    DecodeError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

} // namespace regs
