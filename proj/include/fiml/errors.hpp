#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fiml/fields.hpp"

namespace fiml {

/// Configuration file is malformed, fails schema validation, or carries
/// unknown keys. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File could not be read/written or has the wrong shape. Exit code 5.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Model training failed (factorization, non-finite loss after retries).
/// Exit code 4.
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Residual history of one equation across solver iterations.
struct ResidualHistory {
    std::vector<std::string> equations;
    std::vector<std::vector<double>> norms;  // norms[iter][eq]
};

/// Flow solve did not converge (residual growth, stall, or NaN). Carries the
/// partial state and residual history so callers can inspect or export them.
/// Exit code 3.
class SolverError : public std::runtime_error {
public:
    enum class Kind { NonConvergence, NumericalFailure };

    SolverError(Kind kind, const std::string& msg, ResidualHistory history,
                FlowState partial = FlowState{})
        : std::runtime_error(msg),
          kind(kind),
          history(std::move(history)),
          partial(std::move(partial)) {}

    Kind kind;
    ResidualHistory history;
    FlowState partial;
};

}  // namespace fiml
