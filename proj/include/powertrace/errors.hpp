#pragma once

#include <stdexcept>
#include <string>

namespace powertrace {

// Base for all library errors. The CLI maps these to exit code 1;
// anything else escaping to main is an internal error (exit 2).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file (CSV/JSON schema violations).
class FormatError : public Error {
public:
    using Error::Error;
};

// Estimation failed (insufficient or degenerate data).
class FitError : public Error {
public:
    using Error::Error;
};

// Model bundle persistence problems (version mismatch, corrupt payload).
class BundleError : public Error {
public:
    using Error::Error;
};

// Invalid user-supplied configuration (flags, scenario documents).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Metric preconditions violated (zero variance, zero energy, ...).
class MetricError : public Error {
public:
    using Error::Error;
};

// Incompatible traces passed to aggregation or resampling.
class AggregationError : public Error {
public:
    using Error::Error;
};

// Classifier training failures (bad labels, diverged loss).
class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace powertrace
