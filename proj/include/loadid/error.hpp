#pragma once

#include <stdexcept>
#include <string>

namespace loadid {

// Base for all toolkit failures; `kind()` is used for exit-code mapping.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

#define LOADID_ERROR(Name, Tag)                                         \
    class Name : public Error {                                         \
    public:                                                             \
        using Error::Error;                                             \
        const char* kind() const noexcept override { return Tag; }      \
    }

LOADID_ERROR(ParseError, "parse");
LOADID_ERROR(ValidationError, "validation");
LOADID_ERROR(StateError, "state");
LOADID_ERROR(ConvergenceError, "convergence");
LOADID_ERROR(InfeasibleError, "infeasible");
LOADID_ERROR(SimulationError, "simulation");
LOADID_ERROR(InstabilityError, "instability");
LOADID_ERROR(LinearizationError, "linearization");
LOADID_ERROR(SingularityError, "singularity");
LOADID_ERROR(ConditioningError, "conditioning");
LOADID_ERROR(IdentificationError, "identification");
LOADID_ERROR(ConfigError, "config");

#undef LOADID_ERROR

}  // namespace loadid
