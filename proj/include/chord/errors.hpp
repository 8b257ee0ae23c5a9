#pragma once
// Typed error hierarchy. Every named error condition in the library is a
// distinct exception type so callers can match on what went wrong.

#include <stdexcept>
#include <string>

namespace chord {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// graph construction / augmentation
struct DanglingReference : Error { using Error::Error; };
struct NoTerminal : Error { using Error::Error; };
struct TerminalUnreachable : Error { using Error::Error; };
struct UnknownNominalEdge : Error { using Error::Error; };
struct MergeTargetMissing : Error { using Error::Error; };
struct UnknownFailureMode : Error { using Error::Error; };

// features / monitors
struct DegenerateCloud : Error { using Error::Error; };
struct UnknownFeatureKey : Error { using Error::Error; };
struct MissingFeature : Error { using Error::Error; };

// solvers
struct Infeasible : Error { using Error::Error; };

// simulation / execution
struct UnknownObject : Error { using Error::Error; };
struct UnreachableTarget : Error { using Error::Error; };
struct DeadEnd : Error { using Error::Error; };

// task loading / planner port
struct ParseError : Error { using Error::Error; };
struct SchemaViolation : Error { using Error::Error; };
struct UnknownTask : Error { using Error::Error; };
struct Unreachable : Error { using Error::Error; };
struct InvalidResponse : Error { using Error::Error; };
struct Timeout : Error { using Error::Error; };

// harness
struct IoError : Error { using Error::Error; };

}  // namespace chord
