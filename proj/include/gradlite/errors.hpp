#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gradlite {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimError : public Error {
public:
    using Error::Error;
};

/// Requested rank outside [1, min(rows, cols)].
class RankError : public Error {
public:
    using Error::Error;
};

/// Non-finite value where finite input is required.
class NumError : public Error {
public:
    using Error::Error;
};

class SpdError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class EmptyRunError : public Error {
public:
    using Error::Error;
};

class NonPositiveGapError : public Error {
public:
    using Error::Error;
};

/// Raised when an iterate or intermediate leaves the finite range. Carries the
/// index of the step that produced it.
class DivergedError : public Error {
public:
    DivergedError(std::int64_t step, const std::string& what)
        : Error("diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

    std::int64_t step() const noexcept { return step_; }

private:
    std::int64_t step_;
};

}  // namespace gradlite
