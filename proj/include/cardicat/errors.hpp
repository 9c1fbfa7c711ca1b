// Error taxonomy shared across the library. The CLI maps these to exit codes.
#pragma once

#include <stdexcept>
#include <string>

namespace cardicat {

// Bad invocation: missing files, malformed flags, invalid option combinations.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent data: CSV violations, unknown levels, schema mismatch.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values encountered during training or evaluation.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cardicat
