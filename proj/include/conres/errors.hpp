#pragma once

#include <stdexcept>
#include <string>

namespace conres {

// Invalid architecture/operation configuration (bad shapes, bad hyperparameters).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Data that violates a documented precondition (non-binary mask, out-of-range labels).
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse (non-scalar loss, iteration index past the schedule end).
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// File format problems; message carries the specific defect ("bad magic", ...).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unsatisfiable synthetic-data request after bounded retries.
struct GenerationError : std::runtime_error {
    explicit GenerationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training aborted (non-finite loss or gradient); message names the culprit.
struct TrainAbort : std::runtime_error {
    explicit TrainAbort(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace conres
