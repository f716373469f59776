#pragma once

#include <stdexcept>
#include <string>

namespace advrobust {

// Invalid inputs, dimensions or configuration values.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical routine failed (factorization, root bracketing, divergence).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace advrobust
