#pragma once

#include <memory>
#include <string>
#include <vector>

#include "elhom/grid.hpp"

namespace elhom {

struct SolveStats {
    int iterations = 0;
    double residual = 0.0;  // final relative residual
    double rhs_norm = 0.0;
};

template <int D>
class Preconditioner {
public:
    virtual ~Preconditioner() = default;
    /// z = M^{-1} r; must be symmetric positive (semi)definite.
    virtual void apply(const Field &r, Field &z) const = 0;
};

template <int D>
class JacobiPreconditioner : public Preconditioner<D> {
public:
    explicit JacobiPreconditioner(const StencilOperator<D> &op);
    void apply(const Field &r, Field &z) const override;

private:
    Field inv_diag_;
};

/// Geometric V-cycle on nested grids: Galerkin coarse operators with
/// bilinear prolongation (zero on constrained DOFs), symmetric block
/// Gauss-Seidel smoothing and a dense pseudo-inverse on the coarsest grid.
template <int D>
class MultigridPreconditioner : public Preconditioner<D> {
public:
    MultigridPreconditioner(const StencilOperator<D> &op, const std::vector<char> &constrained,
                            int sweeps = 2, Index min_cells = 2);
    void apply(const Field &r, Field &z) const override;
    int levels() const { return static_cast<int>(ops_.size()); }

private:
    void cycle(int level, const Field &b, Field &x) const;
    void smooth(int level, const Field &b, Field &x, bool forward) const;
    void restrict_to(int level, const Field &fine, Field &coarse) const;
    void prolong_add(int level, const Field &coarse, Field &fine) const;

    std::vector<StencilOperator<D>> ops_;
    std::vector<std::vector<char>> masks_;
    std::vector<std::vector<Eigen::MatrixXd>> block_inv_;
    Eigen::MatrixXd coarse_pinv_;
    int sweeps_;
};

template <int D>
std::unique_ptr<Preconditioner<D>> make_preconditioner(const std::string &name,
                                                       const StencilOperator<D> &op,
                                                       const std::vector<char> &constrained);

/// Preconditioned conjugate gradients. `nullspace` holds Euclidean-orthonormal
/// vectors projected out of the right-hand side, iterates and preconditioned
/// residuals (singular but consistent systems). Converges when
/// ||b - A x|| <= max(tol ||b||, abs_floor); a right-hand side below the
/// floor returns x = 0. Throws SolverDiverged after max_iter iterations.
template <int D>
SolveStats pcg(const StencilOperator<D> &op, const Field &b, Field &x, double tol,
               const Preconditioner<D> &prec, const std::vector<Field> &nullspace = {},
               double abs_floor = 0.0, int max_iter = 5000);

/// Gram-Schmidt orthonormalisation under the Euclidean inner product.
std::vector<Field> orthonormalize(std::vector<Field> vs);

void project_out(const std::vector<Field> &basis, Field &v);

} // namespace elhom
