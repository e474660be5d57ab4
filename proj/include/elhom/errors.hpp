#pragma once

#include <stdexcept>
#include <string>

namespace elhom {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define ELHOM_DEFINE_ERROR(Name)                                               \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string &what) : Error(#Name ": " + what) {}   \
    }

ELHOM_DEFINE_ERROR(InvalidModuli);
ELHOM_DEFINE_ERROR(NonElliptic);
ELHOM_DEFINE_ERROR(SymmetryResidualExceeded);
ELHOM_DEFINE_ERROR(DivergenceResidualTooLarge);
ELHOM_DEFINE_ERROR(NonconformingMeshSize);
ELHOM_DEFINE_ERROR(IllPosed);
ELHOM_DEFINE_ERROR(IncompatibleData);
ELHOM_DEFINE_ERROR(InsufficientPadding);
ELHOM_DEFINE_ERROR(ResolutionMismatch);
ELHOM_DEFINE_ERROR(SingularBlock);
ELHOM_DEFINE_ERROR(ResolutionBudgetExceeded);
ELHOM_DEFINE_ERROR(FitUnderdetermined);
ELHOM_DEFINE_ERROR(NonpositiveError);
ELHOM_DEFINE_ERROR(IoFailure);
ELHOM_DEFINE_ERROR(ConfigError);

#undef ELHOM_DEFINE_ERROR

/// Raised when an iterative solve does not reach its tolerance.
class SolverDiverged : public Error {
public:
    SolverDiverged(double tol, int iterations, double residual)
        : Error("SolverDiverged: tol=" + std::to_string(tol) +
                " iterations=" + std::to_string(iterations) +
                " residual=" + std::to_string(residual)),
          tol(tol), iterations(iterations), residual(residual) {}

    double tol;
    int iterations;
    double residual;
};

} // namespace elhom
