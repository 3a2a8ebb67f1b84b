#pragma once

#include <stdexcept>
#include <string>

namespace critwave {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A radius, band or cone falls outside the grid.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A u-form quantity was requested from a psi-form state or vice versa.
class FormulationError : public Error {
public:
    using Error::Error;
};

/// Invalid solver or scenario configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A diagnostic could not be evaluated on the given input
/// (zero norm, too few snapshots, trajectory too short, ...).
class DiagnosticError : public Error {
public:
    using Error::Error;
};

} // namespace critwave
