#pragma once

#include <stdexcept>
#include <string>

namespace mmcpd {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sample whose psi-covariance is singular (e.g. all observations equal).
class DegenerateSample : public Error {
public:
    using Error::Error;
};

/// A parameter or an implied estimate left the model's parameter domain.
class OutOfDomain : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    using Error::Error;
};

class SingularJacobian : public Error {
public:
    using Error::Error;
};

/// The plug-in covariance cannot be inverted, so T_n is undefined.
class SingularCovariance : public Error {
public:
    using Error::Error;
};

/// Violated precondition on an argument (sizes, levels, config values).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace mmcpd
