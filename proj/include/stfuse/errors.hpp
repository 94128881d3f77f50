#pragma once

#include <stdexcept>
#include <string>

namespace stfuse {

// Error taxonomy maps onto CLI exit codes: config -> 2, estimation/metric -> 3, io -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct EstimationError : Error {
    using Error::Error;
};

struct MetricError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace stfuse
