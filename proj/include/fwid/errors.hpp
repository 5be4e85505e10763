#pragma once

#include <stdexcept>
#include <string>

namespace fwid {

// Error hierarchy. Every failure mode named by a module contract gets its
// own type so callers (and the CLI exit-code mapping) can discriminate.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidParameterError : Error {
    using Error::Error;
};

struct DomainError : Error {
    using Error::Error;
};

// beta*rho41 - sigma12*rho42 (or its 3-counterpart) vanished.
struct SingularInversionError : Error {
    using Error::Error;
};

struct SingularMomentError : Error {
    using Error::Error;
};

struct SingularWeightError : Error {
    using Error::Error;
};

struct InfeasibleNullError : Error {
    using Error::Error;
};

struct DegenerateJError : Error {
    using Error::Error;
};

struct IngestError : Error {
    using Error::Error;
};

}  // namespace fwid
