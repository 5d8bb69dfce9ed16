#pragma once

#include <stdexcept>
#include <string>

namespace afl {

// All library failures surface as one of these types so callers can map them
// to process exit codes without string matching.

// Dimension mismatch between operands (matmul, solve, stats accumulation, ...).
struct shape_error : std::runtime_error {
    explicit shape_error(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values or a numerically unusable system (e.g. factorization breakdown).
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// Argument outside its admissible range (negative regularizer, zero clients, ...).
struct domain_error : std::runtime_error {
    explicit domain_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed serialized payload (bad magic, truncated stream, corrupt header).
struct format_error : std::runtime_error {
    explicit format_error(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem-level failure (missing file, unreadable path, failed write).
struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Forward/predict requested through a layer whose weights are not yet available.
struct missing_weights : std::runtime_error {
    explicit missing_weights(const std::string& what) : std::runtime_error(what) {}
};

// Synchronization barrier violated: a round is missing, duplicating, or
// mislabeling a client contribution.
struct missing_client : std::runtime_error {
    explicit missing_client(const std::string& what) : std::runtime_error(what) {}
};

// Operation requires at least one sample.
struct empty_dataset : std::runtime_error {
    explicit empty_dataset(const std::string& what) : std::runtime_error(what) {}
};

// Selection from an empty collection (e.g. no encoding matrices to choose from).
struct empty_set : std::runtime_error {
    explicit empty_set(const std::string& what) : std::runtime_error(what) {}
};

// Invalid or inconsistent experiment configuration.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace afl
