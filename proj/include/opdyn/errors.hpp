#pragma once

#include <stdexcept>

namespace opdyn {

// Base class for all library errors; the CLI maps these to nonzero exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidConfig : Error { using Error::Error; };
struct NonConvergence : Error { using Error::Error; };
struct ConditionViolated : Error { using Error::Error; };
struct NotPD : Error { using Error::Error; };
struct NotStabilizable : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct MissingReference : Error { using Error::Error; };
struct MissingPerNeighborBound : Error { using Error::Error; };
struct UnknownAgent : Error { using Error::Error; };
struct InfeasibleBounds : Error { using Error::Error; };
struct EmptyTrace : Error { using Error::Error; };
struct IOFailure : Error { using Error::Error; };

}  // namespace opdyn
