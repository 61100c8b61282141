#pragma once

#include <stdexcept>
#include <string>

namespace ttdse {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A layer specification violates its shape or rank constraints.
class SpecError : public Error {
public:
    using Error::Error;
};

/// An operation was applied to a network that does not support it
/// (unknown node, non-adjacent pair, missing data node, ...).
class NetworkError : public Error {
public:
    using Error::Error;
};

/// An exhaustive enumeration would exceed its configured size guard.
class SearchLimitError : public Error {
public:
    using Error::Error;
};

/// A hardware/tiling configuration cannot execute the requested GEMM.
/// The DSE maps this to an infinite cost entry.
class InfeasibleConfig : public Error {
public:
    using Error::Error;
};

/// Every strategy leaves at least one layer without a finite cost.
class InfeasibleModel : public Error {
public:
    using Error::Error;
};

/// A configuration file could not be parsed or failed validation.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace ttdse
