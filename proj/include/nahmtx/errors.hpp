#pragma once

#include <stdexcept>
#include <string>

namespace nahmtx {

// Error taxonomy used across the workbench. Each failure mode the solvers can
// hit maps to one of these so callers (CLI, tests) can route exit codes.

struct InvalidParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Requested a Green/inverse operation at a trivial effective twist, where the
// mode-zero plane problem has no integrable fundamental solution.
struct NonInvertibleMode : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedAsymptoticState : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct RelaxationStalled : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AsymptoticExtractionFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Singular-value ladder has no decisive gap at the expected kernel dimension.
struct AmbiguousKernelDimension : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NearPuncture : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SolverDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PoleFitInconclusive : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingArtifact : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace nahmtx
