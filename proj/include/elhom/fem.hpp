#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "elhom/mesh.hpp"
#include "elhom/solver.hpp"
#include "elhom/tensors.hpp"

namespace elhom {

enum class ProblemMode { mixed, dirichlet, neumann };

template <int D>
struct MixedProblemSpec {
    using TensorFn = std::function<Tensor4<D>(const Point<D> &)>;
    using VectorFn = std::function<Vec<D>(const Point<D> &)>;
    using TractionFn = std::function<Vec<D>(const Point<D> &, const Face &)>;

    Mesh<D> mesh;
    ProblemMode mode = ProblemMode::mixed;
    TensorFn coeff;
    VectorFn body_force;      // F; empty means zero
    VectorFn dirichlet_data;  // f on D; empty means zero
    TractionFn traction;      // g on N; empty means zero
    std::string preconditioner = "multigrid";
};

template <int D>
struct AssembledSystem {
    StencilOperator<D> stiffness;  // before constraint elimination
    Field load;                    // body force + Neumann tractions
    std::vector<char> constrained;
    Field dirichlet_values;        // prescribed values on constrained DOFs, 0 elsewhere
};

template <int D>
struct DiscreteSolution {
    Field u;
    SolveStats stats;
    /// ||(K u - load) restricted to free DOFs|| / ||free load||
    double weak_residual = 0.0;
    /// max |(u, phi_k)_L2| over rigid-body fields (neumann mode only)
    double orthogonality_residual = 0.0;
};

template <int D>
struct RigidBodyBasis {
    std::vector<Field> fields;  // L2-orthonormal nodal vector fields
};

struct CompatibilityResult {
    bool pass = false;
    /// int G + int g per translation component, then the rotational moments
    std::vector<double> residuals;
    /// |residual| / (int |G| + int |g|) weighted by the same rigid field
    std::vector<double> relative;
    double tol = 0.0;
};

template <int D>
AssembledSystem<D> assemble(const MixedProblemSpec<D> &spec);

/// Neumann edge integrals int_N g . v over boundary faces not in D.
template <int D>
Field assemble_traction_load(const Mesh<D> &mesh, const typename MixedProblemSpec<D>::TractionFn &g,
                             bool all_faces);

template <int D>
DiscreteSolution<D> solve_mixed(const MixedProblemSpec<D> &spec, double tol);

template <int D>
DiscreteSolution<D> solve_neumann(const MixedProblemSpec<D> &spec, double tol,
                                  double tol_compat = 1e-6);

/// Quadrature evaluation of int_Omega G + int_dOmega g against each rigid
/// field; passes when every relative residual is <= tol.
template <int D>
CompatibilityResult compatibility_check(const MixedProblemSpec<D> &spec, double tol = 1e-6);

template <int D>
RigidBodyBasis<D> rigid_body_basis(const Mesh<D> &mesh);

/// Remove the L2 projection onto the rigid-body basis.
template <int D>
void orthogonalize_rigid(const Mesh<D> &mesh, const RigidBodyBasis<D> &basis, Field &u);

/// max |(u, phi_k)_L2|
template <int D>
double rigid_orthogonality(const Mesh<D> &mesh, const RigidBodyBasis<D> &basis, const Field &u);

/// max over random u in H^1_D of ||u||_H1 / ||grad u + grad u^T||_L2.
template <int D>
double korn_probe(const Mesh<D> &mesh, int trial_count, std::uint64_t seed);

/// ||u||_H1 / ||grad u + grad u^T||_L2 for one nodal field.
template <int D>
double korn_ratio(const Mesh<D> &mesh, const Field &u);

/// Nodal field of a vector function.
template <int D>
Field nodal_field(const Mesh<D> &mesh, const std::function<Vec<D>(const Point<D> &)> &f);

} // namespace elhom
