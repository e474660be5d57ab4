#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <string>
#include <vector>

#include "elhom/grid.hpp"
#include "elhom/solver.hpp"
#include "elhom/tensors.hpp"

namespace elhom {

/// Periodic n x n (x ...) grid on the torus Q = [-1/2, 1/2]^D.
template <int D>
struct CellGrid {
    Index n = 0;

    explicit CellGrid(Index n);
    Grid<D> grid() const { return Grid<D>::torus(n); }
    double spacing() const { return 1.0 / static_cast<double>(n); }
};

struct CellTolerances {
    double solve = 1e-10;     // relative CG residual
    double equation = 1e-8;   // corrector residual flag
    double mean = 1e-10;
    double symmetry = 1e-8;   // relative to max |A_hat|
    double b_mean = 1e-10;
    double divergence = 1e-6;
    double potential = 1e-6;
};

template <int D>
struct CorrectorSet {
    Grid<D> grid;
    /// chi[j][beta]: nodal field, D components per node
    std::array<std::array<Field, D>, D> chi;
    /// grad[j][beta][e * kQuad + q]: gradient at Gauss point q of element e
    std::array<std::array<std::vector<Mat<D>>, D>, D> grad;
    std::array<std::array<SolveStats, D>, D> stats;

    const Mat<D> &gradient(int j, int beta, Index e, int q) const {
        return grad[j][beta][e * Grid<D>::kQuadPoints + q];
    }
    /// chi_j^beta at a cell point (periodic bilinear interpolation).
    Vec<D> value(int j, int beta, const Point<D> &y) const;
    /// max_{j,beta,component} |cell average|
    double max_mean() const;
    /// max nodal |chi|
    double max_abs() const;
};

template <int D>
struct HomogenizedTensor {
    Tensor4<D> a_hat;
    EllipticityBounds certified_bounds;
    double symmetry_residual = 0.0;  // relative
};

template <int D>
struct FluxDiscrepancy {
    Grid<D> grid;
    /// b at every Gauss point, indexed e * kQuad + q
    std::vector<Tensor4<D>> b;

    const Tensor4<D> &at(Index e, int q) const { return b[e * Grid<D>::kQuadPoints + q]; }
    /// max over quadruples of |cell average|
    double max_mean() const;
    double max_abs() const;
};

/// Flux correctors in two dimensions. The antisymmetric pair (k, i) has a
/// single independent entry: phi[0][1][j][alpha][beta] = psi[j][alpha][beta],
/// phi[1][0] = -psi, phi[k][k] = 0. Each psi is a nodal scalar field.
template <int D>
struct FluxCorrectorSet {
    Grid<D> grid;
    std::array<std::array<std::array<Field, D>, D>, D> psi;
    double max_potential_residual = 0.0;  // Galerkin (normal-equation) residual
    double l2_misfit = 0.0;  // ||d_k phi_k.. - b||_L2 / ||b||_L2 over all (j, alpha, beta)

    /// Nodal field of phi_{kij}^{alpha beta}.
    Field phi(int k, int i, int j, int alpha, int beta) const;
};

struct IdentityEntry {
    std::string name;
    double value = 0.0;
    double tol = 0.0;
    bool pass = false;
};

struct IdentityReport {
    std::vector<IdentityEntry> entries;
    /// non-gated diagnostics
    double phi_l2_misfit = 0.0;
    double phi_antisymmetry = 0.0;

    bool all_pass() const;
    const IdentityEntry &get(const std::string &name) const;
    nlohmann::json to_json() const;
};

template <int D>
CorrectorSet<D> solve_correctors(const CoefficientField<D> &field, const CellGrid<D> &cell,
                                 double tol, const std::string &preconditioner = "multigrid");

template <int D>
HomogenizedTensor<D> homogenized_tensor(const CoefficientField<D> &field,
                                        const CorrectorSet<D> &chi, double tol_sym = 1e-8);

template <int D>
FluxDiscrepancy<D> flux_discrepancy(const CoefficientField<D> &field, const CorrectorSet<D> &chi,
                                    const HomogenizedTensor<D> &a_hat);

/// Weak divergence residual of B: for each (j, beta), the load
/// sum_i int b_ij^{alpha beta} d_i v over nodal test functions v, relative to
/// the corrector right-hand side norm (absolute when that vanishes).
template <int D>
double divergence_residual(const CoefficientField<D> &field, const FluxDiscrepancy<D> &b);

template <int D>
FluxCorrectorSet<D> solve_flux_correctors(const FluxDiscrepancy<D> &b, const CellGrid<D> &cell,
                                          double tol, double divergence = 0.0,
                                          double tol_div = 1e-6,
                                          const std::string &preconditioner = "multigrid");

/// Relative weak residual of the discrete corrector equation for `field`.
template <int D>
double corrector_residual(const CoefficientField<D> &field, const CorrectorSet<D> &chi);

template <int D>
IdentityReport verify_cell_identities(const CoefficientField<D> &field, const CorrectorSet<D> &chi,
                                      const HomogenizedTensor<D> &a_hat,
                                      const FluxDiscrepancy<D> &b, const FluxCorrectorSet<D> &phi,
                                      const CellTolerances &tol = {});

/// Everything the two-scale machinery needs from the cell.
template <int D>
struct CellPipeline {
    CorrectorSet<D> chi;
    HomogenizedTensor<D> a_hat;
    FluxDiscrepancy<D> b;
    FluxCorrectorSet<D> phi;
    IdentityReport report;
};

template <int D>
CellPipeline<D> run_cell_pipeline(const CoefficientField<D> &field, Index n,
                                  const CellTolerances &tol = {},
                                  const std::string &preconditioner = "multigrid");

/// JSON document of the `cell` subcommand.
template <int D>
nlohmann::json cell_json(const CellPipeline<D> &p);

} // namespace elhom
