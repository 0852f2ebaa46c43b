#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace molt {

// Argument outside the mathematical domain of an operation (r <= 0, target on a boundary, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Invalid or inconsistent configuration (orders, grid sizes, unknown keys).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Formulation/boundary-condition combination that is not supported.
class FormulationError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), residual_history(std::move(history)) {}

    std::vector<double> residual_history;
};

} // namespace molt
