#pragma once

#include <stdexcept>
#include <string>

namespace smlc {

// Malformed or unsupported on-disk data (WAV headers, feature files, checkpoints).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Semantically invalid inputs: duplicate ids, unknown categories, non-binary targets.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or hyperparameter mismatches detected before any computation runs.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A dataset entry could not be materialized (unreadable source, bad feature file).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite math is required.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// An augmentation plan cannot be satisfied (no eligible target speakers, etc.).
struct PlanningError : std::runtime_error {
    explicit PlanningError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace smlc
