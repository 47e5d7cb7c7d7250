#pragma once

#include <stdexcept>
#include <string>

namespace nlmv {

/// Malformed input document or configuration.
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

/// The model fails the feasibility condition (or a degenerate dual was hit).
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

/// A solver left its certified region: explosion, clamping overflow,
/// rank-deficient regression, non-finite state.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace nlmv
