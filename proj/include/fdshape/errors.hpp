#pragma once

#include <stdexcept>
#include <string>

namespace fdshape {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error { using Error::Error; };
struct UnstableSystem : Error { using Error::Error; };
struct SingularResolvent : Error { using Error::Error; };

struct DegenerateFraction : Error { using Error::Error; };
struct ImproperTransfer : Error { using Error::Error; };

struct IllPosedLoop : Error { using Error::Error; };
struct UnknownChannel : Error { using Error::Error; };
struct ImproperEntry : Error { using Error::Error; };

struct SingularRecovery : Error { using Error::Error; };
struct SingularCompletion : Error { using Error::Error; };
struct InfeasibleAtStep1 : Error { using Error::Error; };
struct UnstableLoop : Error { using Error::Error; };
struct ImproperScaling : Error { using Error::Error; };
struct UnstableScaling : Error { using Error::Error; };

struct InputError : Error { using Error::Error; };

}  // namespace fdshape
