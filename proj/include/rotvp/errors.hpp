#pragma once
/// Failure types raised by the solver pipeline.

#include <stdexcept>

namespace rotvp {

/// Base class for numerical failures that end a solve or a continuation.
class SolverFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The deformation left the admissible ball ||zeta||_X < r_Omega.
class AdmissibilityLost : public SolverFailure {
public:
    using SolverFailure::SolverFailure;
};

class NoConvergence : public SolverFailure {
public:
    using SolverFailure::SolverFailure;
};

/// The reconstructed constant C does not exceed E0 + E1.
class MaxPrincipleViolation : public SolverFailure {
public:
    using SolverFailure::SolverFailure;
};

/// U(x) and U0(|g^{-1}(x)|) disagree on B_3.
class ConsistencyError : public SolverFailure {
public:
    using SolverFailure::SolverFailure;
};

/// A discretized (id - K_n) could not be factorized.
class SingularOperator : public SolverFailure {
public:
    using SolverFailure::SolverFailure;
};

/// A characteristic left B_4.
class OrbitEscape : public SolverFailure {
public:
    using SolverFailure::SolverFailure;
};

}  // namespace rotvp
