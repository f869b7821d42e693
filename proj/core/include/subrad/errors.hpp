#pragma once

#include <stdexcept>
#include <string>

namespace subrad {

// Base of every error thrown by the library. The CLI maps ConfigError to
// exit code 2 and every other subrad::Error to exit code 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidGeometry : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

// Requested size exceeds what a backend can represent.
class CapacityError : public Error {
public:
    using Error::Error;
};

// State kind not supported by the selected backend.
class UnsupportedState : public Error {
public:
    using Error::Error;
};

// Non-PSD matrices, non-positive fit windows and similar numerical failures.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Same-atom operator products reaching the cumulant closure.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, double time)
        : Error(what + " (t = " + std::to_string(time) + ")"), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

class ConfigError : public Error {
public:
    ConfigError(const std::string& path, const std::string& what)
        : Error(path + ": " + what), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

} // namespace subrad
