#pragma once

#include <stdexcept>
#include <string>

namespace ampere2d {

/// Base class for all solver failures so callers can catch one type.
class SolverError : public std::runtime_error {
  public:
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Source evaluator returned a non-finite value or violated a hypothesis.
class InvalidSourceError : public SolverError {
  public:
    using SolverError::SolverError;
};

/// Spherically averaged source is nonpositive somewhere.
class DegenerateSourceError : public SolverError {
  public:
    using SolverError::SolverError;
};

/// Coefficient matrix lost uniform ellipticity.
class CoefficientDegeneracyError : public SolverError {
  public:
    using SolverError::SolverError;
};

/// Banded factorization of a mode problem failed.
class IllPosedModeError : public SolverError {
  public:
    IllPosedModeError(int mode, const std::string& msg)
        : SolverError(msg), mode(mode) {}
    int mode;
};

/// Defect correction stopped contracting.
class NonPerturbativeCoefficientsError : public SolverError {
  public:
    using SolverError::SolverError;
};

/// Convexity of the updated iterate was lost at a grid node.
class IterationBreakdownError : public SolverError {
  public:
    IterationBreakdownError(const std::string& msg, double r, double theta)
        : SolverError(msg), r(r), theta(theta) {}
    double r, theta;
};

/// Interior source extension cannot meet the mass constraint within bounds.
class ExtensionInfeasibleError : public SolverError {
  public:
    using SolverError::SolverError;
};

/// Converged exterior solution fails to match its boundary data.
class BoundaryConsistencyError : public SolverError {
  public:
    using SolverError::SolverError;
};

/// Asymptotic fit window too narrow for well-conditioned normal equations.
class FitWindowError : public SolverError {
  public:
    using SolverError::SolverError;
};

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ampere2d
