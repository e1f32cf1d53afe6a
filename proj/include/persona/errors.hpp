#pragma once

#include <stdexcept>
#include <string>

namespace persona {

// Invalid or inconsistent configuration (non-stochastic rows, bad ratios, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

// Malformed or inconsistent data (missing months, length mismatches, ...).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error("data error: " + msg) {}
};

// Shape / dimension mismatch between tensors or tables.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error("dimension error: " + msg) {}
};

// Degenerate numeric input (all-constant data, collinear geometry, ...).
struct DegenerateDataError : std::runtime_error {
    explicit DegenerateDataError(const std::string& msg)
        : std::runtime_error("degenerate data: " + msg) {}
};

// A pipeline stage was invoked before its upstream artifacts exist.
struct StageDependencyError : std::runtime_error {
    explicit StageDependencyError(const std::string& msg)
        : std::runtime_error("stage dependency error: " + msg) {}
};

// Protocol misuse (e.g. shuffle test on a non-temporal model).
struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& msg) : std::runtime_error("protocol error: " + msg) {}
};

// Corpus ingestion problems.
struct IngestError : std::runtime_error {
    explicit IngestError(const std::string& msg) : std::runtime_error("ingest error: " + msg) {}
};

// Generation transport failure after retries, or unrecoverable parse failure.
struct GenerationError : std::runtime_error {
    explicit GenerationError(const std::string& msg)
        : std::runtime_error("generation error: " + msg) {}
};

}  // namespace persona
