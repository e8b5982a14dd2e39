// Exception types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace dirsep {

// Base class for every error thrown by this library.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// File could not be read or written.
class io_error : public error {
public:
    using error::error;
};

// File exists but its contents are not what the parser expects.
class format_error : public error {
public:
    using error::error;
};

// File parses but uses an encoding this library does not handle.
class unsupported_error : public error {
public:
    using error::error;
};

// A configuration object violates one of its invariants.
class config_error : public error {
public:
    using error::error;
};

// A numeric argument is outside the mathematical domain of an operation.
class domain_error : public error {
public:
    using error::error;
};

// Input collections have inconsistent dimensions.
class dimension_error : public error {
public:
    using error::error;
};

// Point selection produced an empty set even at the fallback threshold.
class empty_selection_error : public error {
public:
    using error::error;
};

// Too few data points for the requested model size.
class insufficient_data_error : public error {
public:
    using error::error;
};

}  // namespace dirsep
