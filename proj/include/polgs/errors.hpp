#pragma once

#include <stdexcept>
#include <string>

namespace polgs {

// Bad or missing input data (datasets, checkpoints, configs). CLI maps this
// to exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values encountered during optimization. CLI maps this to exit
// code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace polgs
