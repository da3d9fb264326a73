#pragma once

#include <stdexcept>
#include <string>

namespace nms {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Recorded primitive produced a non-finite value, or an invalid input
// (division by zero, log of nonpositive, ...).
struct TapeError : Error {
    using Error::Error;
};

// ||grad f|| fell below the degeneracy threshold; the model leaves the
// class of nondegenerate metriplectic systems at this state.
struct NondegeneracyError : Error {
    using Error::Error;
};

// Adaptive solver exceeded max_steps or the step size underflowed.
struct StiffnessError : Error {
    using Error::Error;
};

// State left the physical domain of a benchmark system.
struct DomainError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace nms
