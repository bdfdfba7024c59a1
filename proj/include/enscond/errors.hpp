#pragma once

#include <stdexcept>
#include <string>

namespace enscond {

// Every failure carries a message naming the violated assumption or the
// offending input; callers either recover by dispatching differently or let
// the error surface to the CLI.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

struct OutsideConeError : Error { using Error::Error; };
struct WrongSectorError : Error { using Error::Error; };
struct IndexOutOfRangeError : Error { using Error::Error; };

struct DegenerateFunctionalError : Error { using Error::Error; };
struct NumericalDegeneracyError : Error { using Error::Error; };

struct InsufficientEffectiveSamplesError : Error { using Error::Error; };
struct NotPositiveDefiniteError : Error { using Error::Error; };
struct InfeasibleLyapunovError : Error { using Error::Error; };
struct DriftViolationError : Error { using Error::Error; };
struct StepRejectedError : Error { using Error::Error; };
struct UnequalDeltaError : Error { using Error::Error; };

} // namespace enscond
