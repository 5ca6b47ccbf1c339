#pragma once

#include <stdexcept>
#include <string>

namespace qgt {

// Base class for all library errors so callers can catch qgt failures wholesale.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// numerics
struct NonConvergence : Error { using Error::Error; };
struct TooShort : Error { using Error::Error; };

// models
struct UnknownModel : Error { using Error::Error; };
struct InvalidSetting : Error { using Error::Error; };
struct NotTwoBand : Error { using Error::Error; };
struct GapCollapse : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };

// geometry
struct AlignmentSingular : Error { using Error::Error; };
struct NotHermitian : Error { using Error::Error; };

// dynamics
struct StepTooLarge : Error { using Error::Error; };
struct AsymptoticViolation : Error { using Error::Error; };
struct DetunedNotClosedForm : Error { using Error::Error; };
struct PulseRejected : Error { using Error::Error; };

// protocols
struct NoPeaks : Error { using Error::Error; };
struct NoPlan : Error { using Error::Error; };
struct PlanMismatch : Error { using Error::Error; };
struct DegenerateRabi : Error { using Error::Error; };
struct InconsistentBases : Error { using Error::Error; };
struct FitPoor : Error { using Error::Error; };

// cli
struct ConfigError : Error { using Error::Error; };

} // namespace qgt
