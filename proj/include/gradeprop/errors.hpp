#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gradeprop {

// Invalid argument to an operation (non-positive radius, empty input, ...).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Input data violates a model invariant (non-finite values, duplicate ids, ...).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure, e.g. a covariance matrix that is not PSD after jitter.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The sampling grid produced no dig locations (interval too coarse or radius
// too small).
class SamplingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A bucket sphere that intersects no candidate block.
class OutsideModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A bucket, truck or dump that could not be estimated.
class EstimationError : public std::runtime_error {
public:
    EstimationError(std::int64_t entity_id, const std::string& what)
        : std::runtime_error(what), entity_id_(entity_id) {}

    [[nodiscard]] std::int64_t entity_id() const noexcept { return entity_id_; }

private:
    std::int64_t entity_id_;
};

// Empty aggregation window in the independent dump mode.
class WindowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input file problem; `line` is 1-based, 0 when not tied to a row.
class LoadError : public std::runtime_error {
public:
    LoadError(std::string file, std::size_t line, const std::string& what)
        : std::runtime_error(file + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
          file_(std::move(file)),
          line_(line) {}

    [[nodiscard]] const std::string& file() const noexcept { return file_; }
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gradeprop
