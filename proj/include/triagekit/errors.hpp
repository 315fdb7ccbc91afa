#pragma once

#include <stdexcept>
#include <string>

namespace triagekit {

// Error categories map onto CLI exit codes: config 2, data 3, numeric 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

} // namespace triagekit
