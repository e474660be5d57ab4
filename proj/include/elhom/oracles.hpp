#pragma once

#include <vector>

#include "elhom/fem.hpp"
#include "elhom/tensors.hpp"

namespace elhom {

/// Piecewise-constant lamination along one axis. Phase p occupies
/// (breakpoints[p], breakpoints[p+1]], the last phase wrapping to
/// breakpoints[0] + 1.
template <int D>
struct LaminateProfile {
    int direction = 0;
    std::vector<Tensor4<D>> phases;
    std::vector<double> breakpoints;

    static LaminateProfile from_field(const CoefficientField<D> &field);
    std::vector<double> volume_fractions() const;
};

template <int D>
struct LaminateOracle {
    Tensor4<D> a_hat;
    /// chi_slope[p][j](alpha, beta): d chi_j^{beta, alpha} / dy_direction in phase p
    std::vector<std::array<Mat<D>, D>> chi_slope;
};

/// Closed-form laminate homogenisation: with M = [a_dd^{alpha gamma}] and
/// N_j = [a_dj^{alpha beta}] per phase, the flux a_dd X_j + N_j is constant
/// and X_j has zero mean. Throws SingularBlock if some M is not invertible.
template <int D>
LaminateOracle<D> laminate_cell_oracle(const LaminateProfile<D> &profile);

/// Volume-weighted harmonic mean.
double harmonic_mean(const std::vector<double> &values, const std::vector<double> &fractions);

template <int D>
struct FineReference {
    DiscreteSolution<D> coarse;
    DiscreteSolution<D> fine;
    Mesh<D> fine_mesh;
    int refinement = 1;
    /// ||u_fine - u_coarse||_L2 / (r^2 - 1) on the coarse mesh
    double estimate = 0.0;
    /// refinement 1 carries no information
    bool informative = false;
};

/// Richardson estimate of the error of a coarse Q1 solution from a solution
/// on the r-times refined mesh, order 2.
template <int D>
double richardson_estimate(const Mesh<D> &coarse_mesh, const Field &coarse, const Mesh<D> &fine_mesh,
                           const Field &fine, int refinement);

/// Fine-mesh nodal values at the coarse nodes.
template <int D>
Field restrict_nodes(const Mesh<D> &coarse_mesh, const Mesh<D> &fine_mesh, const Field &fine,
                     int nc);

/// Solve `spec` on its own mesh and on the r-refined one (r in {1, 2, 4}).
/// ResolutionBudgetExceeded if the refined problem has more than max_dofs.
template <int D>
FineReference<D> fine_reference(const MixedProblemSpec<D> &spec, int refinement, double tol,
                                Index max_dofs = 20'000'000);

} // namespace elhom
